#include "kneeflex/dataset.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>

#include "kneeflex/error.hpp"

namespace kneeflex {

namespace {

long parse_int(std::string_view field, std::size_t line) {
  long v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw FormatError("labels.csv line " + std::to_string(line) + ": not an integer: '" + std::string(field) + "'");
  return v;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

std::string format_labels_csv(const std::vector<DatasetRecord>& records) {
  std::string out(kLabelsHeader);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.index);
    for (double v : r.label.flat()) {
      out += ',';
      out += std::to_string(static_cast<long>(v));
    }
    out += '\n';
  }
  return out;
}

std::vector<DatasetRecord> parse_labels_csv(std::string_view text) {
  std::vector<DatasetRecord> records;
  std::set<long> seen;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = strip_cr(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!header_seen) {
      if (line != kLabelsHeader) throw FormatError("labels.csv: unexpected header '" + std::string(line) + "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    std::array<long, 7> fields{};
    std::size_t col = 0;
    while (true) {
      const auto comma = line.find(',');
      if (col >= fields.size()) throw FormatError("labels.csv line " + std::to_string(line_no) + ": too many columns");
      fields[col++] = parse_int(line.substr(0, comma), line_no);
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (col != fields.size()) throw FormatError("labels.csv line " + std::to_string(line_no) + ": expected 7 columns");
    if (!seen.insert(fields[0]).second)
      throw FormatError("labels.csv: duplicate img index " + std::to_string(fields[0]));
    DatasetRecord rec;
    rec.index = fields[0];
    rec.label = KeypointLabel::from_flat({static_cast<double>(fields[1]), static_cast<double>(fields[2]),
                                          static_cast<double>(fields[3]), static_cast<double>(fields[4]),
                                          static_cast<double>(fields[5]), static_cast<double>(fields[6])});
    records.push_back(rec);
  }
  if (!header_seen) throw FormatError("labels.csv: empty file");
  return records;
}

std::vector<DatasetRecord> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_labels_csv(text);
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_labels_csv(records);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
  const auto records = read_labels_csv(dir / kLabelsFile);
  std::vector<Sample> samples;
  samples.reserve(records.size());
  for (const auto& rec : records) {
    ImageRGBA img = read_image(dir / (std::to_string(rec.index) + ".png"));
    KeypointLabel label = rec.label;
    if (!img.is_frame()) {
      const double sx = static_cast<double>(kFrameWidth) / img.width;
      const double sy = static_cast<double>(kFrameHeight) / img.height;
      for (Point2* p : {&label.thigh, &label.knee, &label.leg}) {
        p->x = (p->x + 0.5) * sx - 0.5;
        p->y = (p->y + 0.5) * sy - 0.5;
      }
      img = resize(img, kFrameWidth, kFrameHeight);
    }
    samples.push_back({std::move(img), label});
  }
  return samples;
}

}  // namespace kneeflex
