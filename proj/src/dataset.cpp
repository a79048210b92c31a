#include "tsact/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "tsact/error.hpp"

namespace tsact {

std::string normalization_name(Normalization n) {
  return n == Normalization::PerSeries ? "per_series" : "none";
}

Normalization parse_normalization(const std::string& name) {
  if (name == "per_series") return Normalization::PerSeries;
  if (name == "none") return Normalization::None;
  throw ConfigError("unknown normalization '" + name + "' (per_series, none)");
}

namespace {

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

LabelMap LabelMap::from_labels(const std::vector<std::string>& raw) {
  std::map<double, std::string> by_value;
  for (const auto& r : raw) {
    double v;
    if (!parse_double(r, v)) throw DataError("label '" + r + "' is not numeric");
    auto [it, inserted] = by_value.emplace(v, r);
    if (!inserted && it->second != r) {
      throw DataError("labels '" + it->second + "' and '" + r + "' denote the same value");
    }
  }
  LabelMap m;
  for (const auto& [v, r] : by_value) {
    m.numeric_.push_back(v);
    m.raw_.push_back(r);
  }
  return m;
}

int LabelMap::encode(const std::string& raw) const {
  double v;
  if (!parse_double(raw, v)) throw DataError("label '" + raw + "' is not numeric");
  const auto it = std::lower_bound(numeric_.begin(), numeric_.end(), v);
  if (it == numeric_.end() || *it != v) {
    throw DataError("label '" + raw + "' does not occur in the training split");
  }
  return static_cast<int>(it - numeric_.begin());
}

RawSplit load_ucr_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  RawSplit out;
  std::vector<double> values;
  std::size_t length = 0;
  std::size_t row = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++row;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    std::size_t col = 0;
    std::size_t count = 0;
    while (true) {
      const auto tab = rest.find('\t');
      const std::string_view field = trim(rest.substr(0, tab));
      ++col;
      if (col == 1) {
        double ignored;
        if (!parse_double(field, ignored)) {
          throw DataError(path.string() + ": row " + std::to_string(row) +
                          ", column 1: label '" + std::string(field) + "' is not numeric");
        }
        out.labels.emplace_back(field);
      } else {
        double v;
        if (!parse_double(field, v)) {
          throw DataError(path.string() + ": row " + std::to_string(row) + ", column " +
                          std::to_string(col) + ": '" + std::string(field) +
                          "' is not a number");
        }
        if (!std::isfinite(v)) {
          throw DataError(path.string() + ": row " + std::to_string(row) +
                          " has missing values; only complete equal-length series are "
                          "supported");
        }
        values.push_back(v);
        ++count;
      }
      if (tab == std::string_view::npos) break;
      rest = rest.substr(tab + 1);
    }
    if (count == 0) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has no observations");
    }
    if (length == 0) {
      length = count;
    } else if (count != length) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has length " +
                      std::to_string(count) + ", expected " + std::to_string(length) +
                      "; variable-length datasets are unsupported");
    }
  }
  if (out.labels.empty()) throw DataError(path.string() + " contains no series");
  out.series = Array({out.labels.size(), length}, std::move(values));
  return out;
}

std::pair<std::vector<int>, LabelMap> encode_labels(const std::vector<std::string>& raw) {
  LabelMap map = LabelMap::from_labels(raw);
  if (map.size() < 2) throw DataError("need at least two distinct labels");
  std::vector<int> encoded;
  encoded.reserve(raw.size());
  for (const auto& r : raw) encoded.push_back(map.encode(r));
  return {std::move(encoded), std::move(map)};
}

DatasetPair load_ucr_dataset(const std::filesystem::path& root, const std::string& name) {
  auto locate = [&](const char* suffix) {
    const std::string file = name + suffix;
    for (const auto& candidate : {root / name / file, root / file}) {
      if (std::filesystem::exists(candidate)) return candidate;
    }
    throw DataError("dataset file " + file + " not found under " + root.string());
  };
  RawSplit train = load_ucr_split(locate("_TRAIN.tsv"));
  RawSplit test = load_ucr_split(locate("_TEST.tsv"));
  if (train.series.dim(1) != test.series.dim(1)) {
    throw DataError(name + ": train and test series lengths differ");
  }
  auto [train_labels, map] = encode_labels(train.labels);
  DatasetPair out;
  out.train = {name, Split::Train, std::move(train.series), std::move(train_labels), map};
  std::vector<int> test_labels;
  for (const auto& r : test.labels) test_labels.push_back(map.encode(r));
  out.test = {name, Split::Test, std::move(test.series), std::move(test_labels), map};
  return out;
}

Dataset znormalize(const Dataset& ds, Normalization mode) {
  Dataset out = ds;
  if (mode == Normalization::None) return out;
  const std::size_t n = ds.size(), len = ds.length();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.series.ptr() + i * len;
    double mean = 0.0;
    for (std::size_t t = 0; t < len; ++t) mean += row[t];
    mean /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t t = 0; t < len; ++t) var += (row[t] - mean) * (row[t] - mean);
    const double sd = std::sqrt(var / static_cast<double>(len));
    for (std::size_t t = 0; t < len; ++t) row[t] = sd < 1e-8 ? 0.0 : (row[t] - mean) / sd;
  }
  return out;
}

void write_ucr_split(const std::filesystem::path& path, const Dataset& ds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.label_map.decode(ds.labels[i]);
    for (std::size_t t = 0; t < ds.length(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.series.at(i, t));
      out << '\t' << buf;
    }
    out << '\n';
  }
}

}  // namespace tsact
