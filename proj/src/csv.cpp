#include "infosample/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "infosample/image_io.hpp"

namespace infosample {

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    rows.push_back(std::move(fields));
  }
  return rows;
}

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << contents;
}

void write_scoremap_csv(const std::string& path, const ScoreMap& map) {
  std::ostringstream out;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (x) out << ',';
      out << format_real(map.at(x, y));
    }
    out << '\n';
  }
  write_text(path, out.str());
}

ScoreMap read_scoremap_csv(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty()) throw FormatError(path + ": empty score map");
  const std::size_t w = rows.front().size();
  GridArray<double> scores(Eigen::Index(rows.size()), Eigen::Index(w));
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != w) throw FormatError(path + ": ragged score map row " + std::to_string(y));
    for (std::size_t x = 0; x < w; ++x) {
      try {
        scores(Eigen::Index(y), Eigen::Index(x)) = std::stod(rows[y][x]);
      } catch (const std::exception&) {
        throw FormatError(path + ": bad number '" + rows[y][x] + "'");
      }
    }
  }
  return ScoreMap(std::move(scores));
}

void write_scoremap_pgm(const std::string& path, const ScoreMap& map) {
  GridArray<int> levels =
      map.values().unaryExpr([](double s) { return int(std::clamp(std::lround(s * 255.0), 0L, 255L)); });
  write_pgm(path, levels);
}

}  // namespace infosample
