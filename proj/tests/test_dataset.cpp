#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "tsact/dataset.hpp"
#include "tsact/error.hpp"

namespace fs = std::filesystem;

namespace tsact {
namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("tsact_ds_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = path_ / name;
    std::ofstream(p) << text;
    return p;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(LoadSplit, SingleLine) {
  TempDir d;
  const RawSplit s = load_ucr_split(d.write("a.tsv", "1\t0.5\t-0.5\n"));
  EXPECT_EQ(s.labels, (std::vector<std::string>{"1"}));
  EXPECT_EQ(s.series.shape(), (Shape{1, 2}));
  EXPECT_EQ(s.series.values(), (std::vector<double>{0.5, -0.5}));
}

TEST(LoadSplit, Errors) {
  TempDir d;
  EXPECT_THROW(load_ucr_split(d.path() / "missing.tsv"), DataError);
  try {
    load_ucr_split(d.write("bad.tsv", "1\t0.5\t0.1\n2\t0.3\tabc\n"));
    FAIL();
  } catch (const DataError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("row 2"), std::string::npos);
    EXPECT_NE(m.find("column 3"), std::string::npos);
  }
  EXPECT_THROW(load_ucr_split(d.write("ragged.tsv", "1\t1\t2\t3\n2\t1\t2\n")), DataError);
  EXPECT_THROW(load_ucr_split(d.write("nan.tsv", "1\t1\tNaN\n")), DataError);
  EXPECT_THROW(load_ucr_split(d.write("empty.tsv", "")), DataError);
}

TEST(Labels, SortedNumerically) {
  const auto [enc, map] = encode_labels({"2", "-1", "1", "2"});
  EXPECT_EQ(map.labels(), (std::vector<std::string>{"-1", "1", "2"}));
  EXPECT_EQ(enc, (std::vector<int>{2, 0, 1, 2}));
  const auto [enc2, map2] = encode_labels({"3", "1", "2"});
  EXPECT_EQ(enc2, (std::vector<int>{2, 0, 1}));
  // numeric, not lexicographic
  const auto [enc3, map3] = encode_labels({"10", "9"});
  EXPECT_EQ(map3.decode(0), "9");
  EXPECT_THROW(map3.encode("5"), DataError);
  EXPECT_THROW(encode_labels({"1", "1"}), DataError);
}

TEST(Labels, TestSplitSharesTrainMap) {
  TempDir d;
  d.write("X_TRAIN.tsv", "1\t0\t1\n2\t1\t0\n");
  d.write("X_TEST.tsv", "2\t0\t1\n1\t1\t1\n");
  const DatasetPair p = load_ucr_dataset(d.path(), "X");
  EXPECT_EQ(p.train.label_map, p.test.label_map);
  EXPECT_EQ(p.test.labels, (std::vector<int>{1, 0}));
  d.write("Y_TRAIN.tsv", "1\t0\t1\n2\t1\t0\n");
  d.write("Y_TEST.tsv", "5\t0\t1\n");
  EXPECT_THROW(load_ucr_dataset(d.path(), "Y"), DataError);
  EXPECT_THROW(load_ucr_dataset(d.path(), "Nope"), DataError);
}

TEST(ZNormalize, Values) {
  Dataset ds;
  ds.series = Array::matrix({{1, 2, 3}, {5, 5, 5}});
  ds.labels = {0, 1};
  const Dataset z = znormalize(ds, Normalization::PerSeries);
  EXPECT_NEAR(z.series.at(0, 0), -1.2247, 1e-4);
  EXPECT_NEAR(z.series.at(0, 0), -std::sqrt(1.5), 1e-15);
  EXPECT_EQ(z.series.at(0, 1), 0.0);
  EXPECT_NEAR(z.series.at(0, 2), std::sqrt(1.5), 1e-15);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(z.series.at(1, j), 0.0);
  EXPECT_EQ(znormalize(ds, Normalization::None).series, ds.series);
  EXPECT_EQ(parse_normalization(normalization_name(Normalization::PerSeries)), Normalization::PerSeries);
  EXPECT_THROW(parse_normalization("minmax"), ConfigError);
}

TEST(ZNormalize, MomentsOnRealData) {
  const DatasetPair p = load_ucr_dataset(TSACT_TEST_DATA, "GunPoint");
  const Dataset z = znormalize(p.train, Normalization::PerSeries);
  for (std::size_t i = 0; i < z.size(); ++i) {
    double m = 0, s = 0;
    for (std::size_t j = 0; j < z.length(); ++j) m += z.series.at(i, j);
    m /= static_cast<double>(z.length());
    for (std::size_t j = 0; j < z.length(); ++j) s += (z.series.at(i, j) - m) * (z.series.at(i, j) - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt(s / static_cast<double>(z.length())), 1.0, 1e-12);
  }
}

TEST(RealData, ShippedShapes) {
  struct Expect {
    const char* name;
    std::size_t train, test, length, classes;
  };
  for (const Expect& e : {Expect{"ItalyPowerDemand", 67, 1029, 24, 2}, Expect{"GunPoint", 50, 150, 150, 2},
                          Expect{"ArrowHead", 36, 175, 251, 3}, Expect{"ChinatownSubset", 20, 22, 24, 2}}) {
    const DatasetPair p = load_ucr_dataset(TSACT_TEST_DATA, e.name);
    EXPECT_EQ(p.train.size(), e.train) << e.name;
    EXPECT_EQ(p.test.size(), e.test) << e.name;
    EXPECT_EQ(p.train.length(), e.length) << e.name;
    EXPECT_EQ(p.train.n_classes(), e.classes) << e.name;
    EXPECT_EQ(p.train.split, Split::Train);
    EXPECT_EQ(p.test.split, Split::Test);
  }
}

TEST(WriteSplit, RoundTrip) {
  TempDir d;
  const DatasetPair p = load_ucr_dataset(TSACT_TEST_DATA, "ArrowHead");
  write_ucr_split(d.path() / "A_TRAIN.tsv", p.train);
  write_ucr_split(d.path() / "A_TEST.tsv", p.test);
  const DatasetPair q = load_ucr_dataset(d.path(), "A");
  EXPECT_EQ(q.train.series, p.train.series);
  EXPECT_EQ(q.test.labels, p.test.labels);
  EXPECT_EQ(q.train.label_map, p.train.label_map);
}

}  // namespace
}  // namespace tsact
