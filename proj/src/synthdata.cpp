// SPDX-License-Identifier: Apache-2.0
#include "sunet/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sunet/errors.hpp"
#include "sunet/rng.hpp"

namespace sunet {

std::string to_string(Laterality v) {
  switch (v) {
    case Laterality::Left: return "left";
    case Laterality::Right: return "right";
    default: return "none";
  }
}

std::string to_string(Location v) {
  switch (v) {
    case Location::Upper: return "upper";
    case Location::Lower: return "lower";
    default: return "none";
  }
}

Laterality parse_laterality(const std::string& s) {
  if (s == "left") return Laterality::Left;
  if (s == "right") return Laterality::Right;
  if (s == "none") return Laterality::None;
  throw std::invalid_argument("unknown laterality '" + s + "'");
}

Location parse_location(const std::string& s) {
  if (s == "upper") return Location::Upper;
  if (s == "lower") return Location::Lower;
  if (s == "none") return Location::None;
  throw std::invalid_argument("unknown location '" + s + "'");
}

RegionStats region_stats(const Mask& mask) {
  // Integer moment sums keep mirroring and translation exact.
  std::int64_t n = 0, sr = 0, sc = 0, srr = 0, scc = 0, src = 0;
  for (std::size_t r = 0; r < mask.height; ++r) {
    for (std::size_t c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      const auto ri = static_cast<std::int64_t>(r), ci = static_cast<std::int64_t>(c);
      ++n;
      sr += ri;
      sc += ci;
      srr += ri * ri;
      scc += ci * ci;
      src += ri * ci;
    }
  }
  RegionStats s;
  if (n == 0) return s;
  s.present = true;
  s.area = static_cast<std::size_t>(n);

  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  const double var_r = static_cast<double>(n * srr - sr * sr) / n2 + 1.0 / 12.0;
  const double var_c = static_cast<double>(n * scc - sc * sc) / n2 + 1.0 / 12.0;
  const double cov = static_cast<double>(n * src - sr * sc) / n2;
  const double mid = 0.5 * (var_r + var_c);
  const double half_diff = 0.5 * (var_r - var_c);
  const double radius = std::sqrt(half_diff * half_diff + cov * cov);
  const double lambda_max = mid + radius;
  const double lambda_min = mid - radius;
  s.eccentricity = std::sqrt(std::clamp(1.0 - lambda_min / lambda_max, 0.0, 1.0));

  // centroid (pixel centres at index + 0.5) compared with the midlines, in integers:
  // sum/n + 0.5 < W/2  <=>  2*sum + n < n*W
  const auto w = static_cast<std::int64_t>(mask.width), h = static_cast<std::int64_t>(mask.height);
  s.laterality = 2 * sc + n < n * w ? Laterality::Left : Laterality::Right;
  s.location = 2 * sr + n < n * h ? Location::Upper : Location::Lower;
  return s;
}

void GeneratorSpec::validate() const {
  if (!(p_present >= 0.0 && p_present <= 1.0)) throw ConfigError("p_present must lie in [0, 1]");
  if (!(area_range.first >= 4.0 && area_range.first <= area_range.second)) {
    throw ConfigError("area_range must satisfy 4 <= lo <= hi");
  }
  if (!(ecc_range.first >= 0.0 && ecc_range.first <= ecc_range.second && ecc_range.second < 1.0)) {
    throw ConfigError("ecc_range must satisfy 0 <= lo <= hi < 1");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (image_size < 4) throw ConfigError("image_size must be >= 4");
  if (slices_per_subject < 1) throw ConfigError("slices_per_subject must be >= 1");
  const double ratio = std::sqrt(1.0 - ecc_range.second * ecc_range.second);
  const double semi_major = std::sqrt(area_range.second / (std::numbers::pi * ratio));
  if (2.0 * (semi_major + 1.0) > static_cast<double>(image_size)) {
    throw ConfigError("ellipse with area " + std::to_string(area_range.second) + " and eccentricity " +
                      std::to_string(ecc_range.second) + " cannot fit inside a " + std::to_string(image_size) +
                      "-pixel image");
  }
}

Mask rasterize_ellipse(std::size_t size, double cy, double cx, double semi_major, double semi_minor, double angle) {
  Mask m(size, size, 0);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double dy = static_cast<double>(r) + 0.5 - cy;
      const double dx = static_cast<double>(c) + 0.5 - cx;
      const double u = dx * ca + dy * sa;
      const double v = -dx * sa + dy * ca;
      if ((u * u) / (semi_major * semi_major) + (v * v) / (semi_minor * semi_minor) <= 1.0) m.at(r, c) = 1;
    }
  }
  return m;
}

std::vector<SegmentationSample> generate(std::size_t n, const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t size = spec.image_size;
  const double extent = static_cast<double>(size);
  std::vector<SegmentationSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    SegmentationSample s;
    char id[32];
    std::snprintf(id, sizeof id, "SYN_%03zu", i / spec.slices_per_subject);
    s.sample_id = id;
    s.slice_index = static_cast<int>(i % spec.slices_per_subject);

    // Low-frequency texture: three random plane waves of at most two cycles per image.
    s.image = Image(size, size, 0.3);
    for (int k = 0; k < 3; ++k) {
      const double fy = rng.uniform(-2.0, 2.0), fx = rng.uniform(-2.0, 2.0);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double amp = rng.uniform(0.01, 0.05);
      for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t c = 0; c < size; ++c) {
          s.image.at(r, c) +=
              amp * std::cos(2.0 * std::numbers::pi * (fy * double(r) + fx * double(c)) / extent + phase);
        }
      }
    }

    s.mask = Mask(size, size, 0);
    if (rng.uniform() < spec.p_present) {
      const double area = rng.uniform(spec.area_range.first, spec.area_range.second);
      const double ecc = rng.uniform(spec.ecc_range.first, spec.ecc_range.second);
      const double ratio = std::sqrt(1.0 - ecc * ecc);
      const double semi_major = std::sqrt(area / (std::numbers::pi * ratio));
      const double semi_minor = semi_major * ratio;
      const double angle = rng.uniform(0.0, std::numbers::pi);
      const double margin = semi_major + 1.0;
      const double cy = rng.uniform(margin, extent - margin);
      const double cx = rng.uniform(margin, extent - margin);
      s.mask = rasterize_ellipse(size, cy, cx, semi_major, semi_minor, angle);
      for (std::size_t p = 0; p < s.mask.size(); ++p) {
        if (s.mask.data[p]) s.image.data[p] += spec.contrast;
      }
    }
    for (double& v : s.image.data) v = std::clamp(v + spec.noise_sigma * rng.normal(), 0.0, 1.0);

    s.stats = region_stats(s.mask);
    if (spec.emit_grade) {
      std::string grade = "none";
      if (s.stats.present) {
        const double span = spec.area_range.second - spec.area_range.first;
        const double q = span > 0 ? (double(s.stats.area) - spec.area_range.first) / span : 0.0;
        grade = "G" + std::to_string(std::clamp(static_cast<int>(std::floor(4.0 * q)), 0, 3) + 1);
      }
      s.stats.extra.emplace_back("grade", grade);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PGM

void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << pixels.width << ' ' << pixels.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data.data()), static_cast<std::streamsize>(pixels.data.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Grid<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string file = path.string();
  std::size_t pos = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  auto skip = [&] {
    while (pos < data.size()) {
      if (is_space(data[pos])) {
        ++pos;
      } else if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) {
    skip();
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') {
      v = v * 10 + static_cast<std::size_t>(data[pos] - '0');
      if (v > (1u << 20)) throw ParseError(file, start, std::string(what) + " too large");
      ++pos;
    }
    if (pos == start) throw ParseError(file, start, std::string("expected ") + what);
    return v;
  };

  if (data.size() < 2 || data[0] != 'P' || data[1] != '5') throw ParseError(file, 0, "missing P5 magic");
  pos = 2;
  const std::size_t width = number("width");
  const std::size_t height = number("height");
  const std::size_t maxval = number("maxval");
  if (maxval != 255) throw ParseError(file, pos, "only maxval 255 is supported");
  if (pos >= data.size() || !is_space(data[pos])) throw ParseError(file, pos, "expected whitespace before raster");
  ++pos;
  if (data.size() - pos != width * height) {
    throw ParseError(file, pos,
                     "raster holds " + std::to_string(data.size() - pos) + " bytes, expected " +
                         std::to_string(width * height));
  }
  Grid<std::uint8_t> g(height, width);
  std::copy(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end(), g.data.begin());
  return g;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

const std::vector<std::string> kStatsColumns{"sample_id", "slice",      "present", "area",
                                             "eccentricity", "laterality", "location"};

std::string file_stem(const SegmentationSample& s) { return s.sample_id + "_" + std::to_string(s.slice_index); }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Field {
  std::string text;
  std::size_t offset;
};

std::vector<Field> split_line(const std::string& line, std::size_t line_offset) {
  std::vector<Field> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::size_t end = comma == std::string::npos ? line.size() : comma;
    out.push_back({line.substr(start, end - start), line_offset + start});
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::string stats_csv_header(const std::vector<std::string>& extra_columns) {
  std::string h;
  for (const auto& c : kStatsColumns) h += (h.empty() ? "" : ",") + c;
  for (const auto& c : extra_columns) h += "," + c;
  return h;
}

void write_stats_csv(const std::filesystem::path& path, const std::vector<StatsRow>& rows) {
  std::vector<std::string> extra;
  if (!rows.empty()) {
    for (const auto& [k, v] : rows.front().stats.extra) extra.push_back(k);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << stats_csv_header(extra) << '\n';
  for (const StatsRow& r : rows) {
    if (r.sample_id.find_first_of(",\n") != std::string::npos) {
      throw std::invalid_argument("sample_id may not contain commas or newlines: " + r.sample_id);
    }
    if (r.stats.extra.size() != extra.size()) throw std::invalid_argument("rows disagree on extra columns");
    const RegionStats& s = r.stats;
    out << r.sample_id << ',' << r.slice_index << ',' << (s.present ? 1 : 0) << ',' << s.area << ','
        << format_double(s.eccentricity) << ',' << to_string(s.laterality) << ',' << to_string(s.location);
    for (std::size_t k = 0; k < extra.size(); ++k) {
      if (s.extra[k].first != extra[k]) throw std::invalid_argument("rows disagree on extra columns");
      out << ',' << s.extra[k].second;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<StatsRow> read_stats_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string file = path.string();

  std::vector<std::pair<std::string, std::size_t>> lines;
  std::size_t start = 0;
  while (start < data.size()) {
    std::size_t end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    std::string line = data.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.emplace_back(std::move(line), start);
    start = end + 1;
  }
  if (lines.empty()) throw ParseError(file, 0, "missing header");
  const auto header = split_line(lines[0].first, lines[0].second);
  if (header.size() < kStatsColumns.size()) throw ParseError(file, 0, "header has too few columns");
  for (std::size_t k = 0; k < kStatsColumns.size(); ++k) {
    if (header[k].text != kStatsColumns[k]) {
      throw ParseError(file, header[k].offset, "expected column '" + kStatsColumns[k] + "', got '" + header[k].text + "'");
    }
  }

  auto parse_int = [&](const Field& f) -> long long {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(f.text, &used);
      if (used != f.text.size()) throw std::invalid_argument(f.text);
      return v;
    } catch (const std::exception&) {
      throw ParseError(file, f.offset, "expected integer, got '" + f.text + "'");
    }
  };

  std::vector<StatsRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_line(lines[li].first, lines[li].second);
    if (fields.size() != header.size()) {
      throw ParseError(file, lines[li].second,
                       "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    StatsRow r;
    r.sample_id = fields[0].text;
    if (r.sample_id.empty()) throw ParseError(file, fields[0].offset, "empty sample_id");
    r.slice_index = static_cast<int>(parse_int(fields[1]));
    const long long present = parse_int(fields[2]);
    if (present != 0 && present != 1) throw ParseError(file, fields[2].offset, "present must be 0 or 1");
    r.stats.present = present == 1;
    const long long area = parse_int(fields[3]);
    if (area < 0) throw ParseError(file, fields[3].offset, "negative area");
    r.stats.area = static_cast<std::size_t>(area);
    try {
      std::size_t used = 0;
      r.stats.eccentricity = std::stod(fields[4].text, &used);
      if (used != fields[4].text.size()) throw std::invalid_argument(fields[4].text);
    } catch (const std::exception&) {
      throw ParseError(file, fields[4].offset, "expected number, got '" + fields[4].text + "'");
    }
    try {
      r.stats.laterality = parse_laterality(fields[5].text);
    } catch (const std::invalid_argument& e) {
      throw ParseError(file, fields[5].offset, e.what());
    }
    try {
      r.stats.location = parse_location(fields[6].text);
    } catch (const std::invalid_argument& e) {
      throw ParseError(file, fields[6].offset, e.what());
    }
    for (std::size_t k = kStatsColumns.size(); k < fields.size(); ++k) {
      r.stats.extra.emplace_back(header[k].text, fields[k].text);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void save_dataset(const std::filesystem::path& dir, const std::vector<SegmentationSample>& samples) {
  std::filesystem::create_directories(dir);
  std::vector<StatsRow> rows;
  for (const SegmentationSample& s : samples) {
    if (!s.image.same_extent(s.mask)) throw ShapeError("sample " + file_stem(s) + ": image and mask extents differ");
    Grid<std::uint8_t> img(s.image.height, s.image.width);
    for (std::size_t p = 0; p < img.size(); ++p) {
      img.data[p] = static_cast<std::uint8_t>(std::lround(std::clamp(s.image.data[p], 0.0, 1.0) * 255.0));
    }
    Grid<std::uint8_t> mask(s.mask.height, s.mask.width);
    for (std::size_t p = 0; p < mask.size(); ++p) mask.data[p] = s.mask.data[p] ? 255 : 0;
    write_pgm(dir / (file_stem(s) + ".img.pgm"), img);
    write_pgm(dir / (file_stem(s) + ".mask.pgm"), mask);
    rows.push_back({s.sample_id, s.slice_index, s.stats});
  }
  write_stats_csv(dir / "stats.csv", rows);
}

std::vector<SegmentationSample> load_dataset(const std::filesystem::path& dir) {
  std::vector<SegmentationSample> out;
  for (StatsRow& r : read_stats_csv(dir / "stats.csv")) {
    SegmentationSample s;
    s.sample_id = std::move(r.sample_id);
    s.slice_index = r.slice_index;
    s.stats = std::move(r.stats);
    const auto img = read_pgm(dir / (file_stem(s) + ".img.pgm"));
    const auto mask = read_pgm(dir / (file_stem(s) + ".mask.pgm"));
    if (!img.same_extent(mask)) throw ShapeError("sample " + file_stem(s) + ": image and mask extents differ");
    s.image = Image(img.height, img.width);
    for (std::size_t p = 0; p < img.size(); ++p) s.image.data[p] = img.data[p] / 255.0;
    s.mask = Mask(mask.height, mask.width);
    for (std::size_t p = 0; p < mask.size(); ++p) s.mask.data[p] = mask.data[p] >= 128 ? 1 : 0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sunet
