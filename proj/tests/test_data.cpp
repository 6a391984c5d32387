#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sspn/data.hpp"
#include "sspn/error.hpp"

using namespace sspn;

namespace {

std::string data_file(const std::string& name) { return std::string(SSPN_DATA_DIR) + "/" + name; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

std::vector<std::size_t> class_counts(const Dataset& d, const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> c(d.num_classes, 0);
  for (std::size_t r : rows) ++c[d.labels[r]];
  return c;
}

}  // namespace

TEST_CASE("parse_csv") {
  SUBCASE("label encoding by first appearance") {
    const Dataset d = parse_csv("f1,cls,f2\n1.5,a,2\n-3,b,4e-1\n0,a,7\n", "cls");
    CHECK(d.rows() == 3);
    CHECK(d.dims() == 2);
    CHECK(d.num_classes == 2);
    CHECK(d.labels == std::vector<int>{0, 1, 0});  // classes 1, 2, 1
    CHECK(d.class_names == std::vector<std::string>{"a", "b"});
    CHECK(d.feature_names == std::vector<std::string>{"f1", "f2"});
    CHECK(d.features(1, 0) == -3.0);
    CHECK(d.features(1, 1) == 0.4);
  }
  SUBCASE("errors") {
    CHECK(code_of([] { parse_csv("f1,class\n1,a\nx,b\n", "class"); }) == ErrorCode::ParseError);
    try {
      parse_csv("f1,f2,class\n1,2,a\n3,oops,b\n", "class");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 3") != std::string::npos);
      CHECK(msg.find("f2") != std::string::npos);
    }
    CHECK(code_of([] { parse_csv("f1,class\n1,a\n?,b\n", "class"); }) == ErrorCode::MissingValue);
    CHECK(code_of([] { parse_csv("f1,class\n1,a\n,b\n", "class"); }) == ErrorCode::MissingValue);
    CHECK(code_of([] { parse_csv("f1,class\n1,a\n2\n", "class"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_csv("f1,label\n1,a\n", "class"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { load_csv("/nonexistent/file.csv", "class"); }) == ErrorCode::IoError);
  }
}

TEST_CASE("bundled datasets") {
  const Dataset iris = load_csv(data_file("iris.csv"), "class");
  CHECK(iris.rows() == 150);
  CHECK(iris.dims() == 4);
  CHECK(iris.num_classes == 3);
  const Dataset bupa = load_csv(data_file("bupa.csv"), "class");
  CHECK(bupa.rows() == 345);
  CHECK(bupa.dims() == 6);
  CHECK(bupa.num_classes == 2);
  CHECK(SplitSpec::standard_protocol(bupa, 0).labelled_count == 14);
  CHECK(SplitSpec::standard_protocol(bupa, 0).validation_count == 14);
  const Dataset wine = load_csv(data_file("wine.csv"), "class");
  CHECK(wine.rows() == 178);
  CHECK(wine.dims() == 13);
  CHECK(SplitSpec::standard_protocol(wine, 0).labelled_count == 29);
}

TEST_CASE("preprocess") {
  Dataset d = parse_csv("a,b,c,class\n1,5,0,x\n2,5,10,y\n3,5,20,x\n", "class");
  const auto p = preprocess(d, {0, 1, 2});
  CHECK(p.dataset.dims() == 2);  // constant column b dropped
  CHECK(p.dataset.feature_names == std::vector<std::string>{"a", "c"});
  CHECK(p.dataset.features(0, 0) == doctest::Approx(-1.0));
  CHECK(p.dataset.features(1, 0) == doctest::Approx(0.0));
  CHECK(p.dataset.features(2, 0) == doctest::Approx(1.0));

  SUBCASE("held-out rows use the fit statistics") {
    const auto q = preprocess(d, {0, 1});
    // Fit on rows 0-1 of column a: mean 1.5, sd 0.7071.
    CHECK(q.dataset.features(2, 0) == doctest::Approx((3 - 1.5) / std::sqrt(0.5)));
    const ColMatrix fresh = q.transform.apply(ColMatrix::from_rows({{10, 5, 0}}));
    CHECK(fresh(0, 0) == doctest::Approx((10 - 1.5) / std::sqrt(0.5)));
  }
  SUBCASE("fit rows have mean 0 and sample sd 1") {
    const Dataset wine = load_csv(data_file("wine.csv"), "class");
    std::vector<std::size_t> rows(100);
    std::iota(rows.begin(), rows.end(), 20);
    const auto w = preprocess(wine, rows);
    for (std::size_t c = 0; c < w.dataset.dims(); ++c) {
      double m = 0, s = 0;
      for (std::size_t r : rows) m += w.dataset.features(r, c) / rows.size();
      for (std::size_t r : rows) s += (w.dataset.features(r, c) - m) * (w.dataset.features(r, c) - m);
      CHECK(std::abs(m) < 1e-9);
      CHECK(std::abs(std::sqrt(s / (rows.size() - 1)) - 1.0) < 1e-9);
    }
  }
  SUBCASE("all features constant") {
    const Dataset flat = parse_csv("a,class\n1,x\n1,y\n", "class");
    CHECK(code_of([&] { preprocess(flat, {0, 1}); }) == ErrorCode::AllFeaturesDegenerate);
  }
}

TEST_CASE("stratified quotas") {
  CHECK(stratified_quotas({50, 50, 50}, 11, true) == std::vector<std::size_t>{4, 4, 3});
  CHECK(stratified_quotas({90, 10}, 5, true) == std::vector<std::size_t>{4, 1});
  CHECK(stratified_quotas({98, 2}, 5, true) == std::vector<std::size_t>{4, 1});
  CHECK(stratified_quotas({98, 2}, 5, false) == std::vector<std::size_t>{5, 0});
  const auto q = stratified_quotas({7, 13, 29}, 17, true);
  CHECK(std::accumulate(q.begin(), q.end(), std::size_t{0}) == 17);
}

TEST_CASE("make_split") {
  for (const char* name : {"iris.csv", "bupa.csv", "wine.csv", "haberman.csv"}) {
    CAPTURE(name);
    const Dataset d = load_csv(data_file(name), "class");
    std::set<std::vector<std::size_t>> labelled_sets;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const SplitSpec spec = SplitSpec::standard_protocol(d, seed);
      const Split s = make_split(d, spec);
      // Partition.
      std::vector<std::size_t> all;
      for (const auto* part : {&s.labelled, &s.validation, &s.unlabelled, &s.test}) all.insert(all.end(), part->begin(), part->end());
      std::sort(all.begin(), all.end());
      std::vector<std::size_t> expect(d.rows());
      std::iota(expect.begin(), expect.end(), 0);
      CHECK(all == expect);
      CHECK(s.labelled.size() == spec.labelled_count);
      CHECK(s.validation.size() == spec.validation_count);
      CHECK(s.test.size() == static_cast<std::size_t>(std::llround(0.2 * d.rows())));
      // Stratification: labelled counts within 1 of the train proportions.
      const auto train = class_counts(d, s.train());
      const auto lab = class_counts(d, s.labelled);
      const double train_n = static_cast<double>(s.train().size());
      for (int k = 0; k < d.num_classes; ++k) {
        CHECK(lab[k] >= 1);
        CHECK(std::abs(lab[k] - spec.labelled_count * train[k] / train_n) < 1.0);
      }
      labelled_sets.insert([&] {
        auto v = s.labelled;
        std::sort(v.begin(), v.end());
        return v;
      }());
      if (seed <= 3) CHECK(make_split(d, spec) == s);
    }
    CHECK(labelled_sets.size() == 100);
  }
}

TEST_CASE("split errors and manifest") {
  const Dataset tiny = parse_csv("a,class\n1,x\n2,x\n3,x\n4,x\n5,y\n", "class");
  SplitSpec spec{1, 0.2, 2, 2};
  CHECK(code_of([&] { make_split(tiny, spec); }) == ErrorCode::InsufficientRows);

  const Dataset iris = load_csv(data_file("iris.csv"), "class");
  const Split s = make_split(iris, SplitSpec::standard_protocol(iris, 5));
  const std::string json = split_to_json(s);
  CHECK(split_from_json(json) == s);
  CHECK(split_to_json(split_from_json(json)) == json);
  CHECK(code_of([] { split_from_json("[1, 2"); }) == ErrorCode::ParseError);
}

TEST_CASE("two moons") {
  const Dataset m = make_two_moons(200, 0.1, 1);
  CHECK(m.rows() == 200);
  CHECK(m.dims() == 2);
  CHECK(m.num_classes == 2);
  CHECK(std::count(m.labels.begin(), m.labels.end(), 0) == 100);
  const Dataset again = make_two_moons(200, 0.1, 1);
  CHECK(again.features == m.features);
}
