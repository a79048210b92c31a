#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tsact/array.hpp"

namespace tsact {

enum class Split { Train, Test };
enum class Normalization { PerSeries, None };

std::string normalization_name(Normalization n);
Normalization parse_normalization(const std::string& name);

// Raw labels sorted ascending by numeric value; the position of a raw label
// is its encoded class index.
class LabelMap {
 public:
  LabelMap() = default;
  // Builds the map from every distinct label in `raw`.
  static LabelMap from_labels(const std::vector<std::string>& raw);

  std::size_t size() const noexcept { return raw_.size(); }
  // Throws DataError for a label that is not in the map.
  int encode(const std::string& raw) const;
  const std::string& decode(int index) const { return raw_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& labels() const noexcept { return raw_; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::vector<std::string> raw_;
  std::vector<double> numeric_;
};

// One split of an equal-length univariate dataset.
struct RawSplit {
  std::vector<std::string> labels;
  Array series;  // (N, L)
};

struct Dataset {
  std::string name;
  Split split = Split::Train;
  Array series;             // (N, L)
  std::vector<int> labels;  // in [0, label_map.size())
  LabelMap label_map;

  std::size_t size() const { return series.empty() ? 0 : series.dim(0); }
  std::size_t length() const { return series.empty() ? 0 : series.dim(1); }
  std::size_t n_classes() const { return label_map.size(); }
};

// Parses a UCR TSV file: one series per line, first field the label, the
// remaining tab-separated fields the observations. Throws DataError for a
// missing file, a non-numeric field (row and column in the message), ragged
// rows, or missing values.
RawSplit load_ucr_split(const std::filesystem::path& path);

// Encodes `raw` with a label map built from the same labels. Requires at
// least two distinct labels.
std::pair<std::vector<int>, LabelMap> encode_labels(const std::vector<std::string>& raw);

struct DatasetPair {
  Dataset train;
  Dataset test;
};

// Loads <root>/<name>/<name>_TRAIN.tsv and _TEST.tsv (or the same files
// directly under <root>). The test split is encoded with the train split's
// label map; an unseen test label is a DataError.
DatasetPair load_ucr_dataset(const std::filesystem::path& root, const std::string& name);

// PerSeries: each series to mean 0 and population standard deviation 1;
// series with sigma < 1e-8 become all zeros. None: identity.
Dataset znormalize(const Dataset& ds, Normalization mode);

// Writes the split back in UCR TSV format (labels decoded, values printed
// with round-trip precision).
void write_ucr_split(const std::filesystem::path& path, const Dataset& ds);

}  // namespace tsact
