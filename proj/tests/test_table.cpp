#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "tabboost/csv.hpp"
#include "tabboost/error.hpp"
#include "tabboost/synthetic.hpp"
#include "tabboost/table.hpp"
#include "tabboost/util.hpp"

using namespace tabboost;

namespace {

Schema age_job_schema() {
  Schema s;
  s.columns = {{"age", ColumnKind::numeric, {}}, {"job", ColumnKind::categorical, {"engineer", "teacher"}}};
  s.class_names = {"no", "yes"};
  s.positive_class = 1;
  s.task_description = "Yes or no?";
  return s;
}

Dataset labelled(std::vector<int> labels, std::size_t classes = 2) {
  Dataset d;
  d.schema.columns = {{"x", ColumnKind::numeric, {}}};
  for (std::size_t c = 0; c < classes; ++c) d.schema.class_names.push_back("c" + std::to_string(c));
  d.schema.positive_class = 1;
  for (std::size_t i = 0; i < labels.size(); ++i) d.rows.push_back({static_cast<double>(i)});
  d.labels = std::move(labels);
  return d;
}

}  // namespace

TEST_CASE("csv quoting") {
  const auto recs = csv::parse("a,\"b,c\",\"d\"\"e\"\n1,,3\r\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0] == csv::Record{"a", "b,c", "d\"e"});
  CHECK(recs[1] == csv::Record{"1", "", "3"});
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("x,y") == "\"x,y\"");
  CHECK(csv::escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv::parse(csv::join({"p q", "r,s", "t\"u"}))[0] == csv::Record{"p q", "r,s", "t\"u"});
}

TEST_CASE("load_dataset") {
  const Schema s = age_job_schema();
  SUBCASE("two rows") {
    const Dataset d = load_dataset("age,job,label\n30,engineer,no\n41.5,teacher,yes\n", s);
    CHECK(d.size() == 2);
    CHECK(d.schema.num_features() == 2);
    CHECK(d.rows[1][0] == 41.5);
    CHECK(d.rows[1][1] == 1.0);
    CHECK(d.labels == std::vector<int>{0, 1});
  }
  SUBCASE("header order is free") {
    const Dataset d = load_dataset("label,job,age\nyes,teacher,30\n", s);
    CHECK(d.rows[0] == FeatureRow{30, 1});
  }
  SUBCASE("empty cells are missing") {
    const Dataset d = load_dataset("age,job,label\n,engineer,no\n30,,yes\n", s);
    CHECK(is_missing(d.rows[0][0]));
    CHECK(is_missing(d.rows[1][1]));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(load_dataset("age,job,label\n30,engineer,maybe\n", s), DataError);
    CHECK_THROWS_AS(load_dataset("age,job,label\n30,pilot,no\n", s), DataError);
    CHECK_THROWS_AS(load_dataset("age,job,label\nthirty,engineer,no\n", s), DataError);
    CHECK_THROWS_AS(load_dataset("age,label\n30,no\n", s), DataError);
    CHECK_THROWS_AS(load_dataset("age,job,height,label\n30,engineer,2,no\n", s), DataError);
    CHECK_THROWS_AS(load_dataset("age,job,label\n30,engineer\n", s), DataError);
  }
}

TEST_CASE("schema json round trip and validation") {
  Schema s = age_job_schema();
  s.class_verbalizations = {"No", "Yes"};
  const Schema back = parse_schema_json(schema_to_json(s));
  CHECK(back.columns.size() == 2);
  CHECK(back.columns[1].categories == s.columns[1].categories);
  CHECK(back.positive_class == s.positive_class);
  CHECK(back.class_verbalizations == s.class_verbalizations);
  CHECK(back.task_description == s.task_description);

  Schema bad = s;
  bad.class_names = {"only"};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = s;
  bad.class_names = {"a", "a"};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = s;
  bad.positive_class = 2;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = s;
  bad.columns[1].categories.clear();
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("dataset csv round trip keeps values and missing cells") {
  SyntheticConfig sc;
  sc.samples = 300;
  sc.missing_rate = 0.1;
  const Dataset d = make_synthetic(sc);
  const Dataset back = load_dataset(dataset_to_csv(d), d.schema);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.rows[i].size(); ++j) {
      if (is_missing(d.rows[i][j])) CHECK(is_missing(back.rows[i][j]));
      else CHECK(back.rows[i][j] == d.rows[i][j]);
    }
  }
  CHECK(back.labels == d.labels);
}

TEST_CASE("stratified_kfold") {
  SUBCASE("10 samples, 6/4 split, k=5") {
    const Dataset d = labelled({0, 0, 0, 0, 0, 0, 1, 1, 1, 1});
    const FoldPlan p = stratified_kfold(d, 5, 3);
    for (int f = 0; f < 5; ++f) {
      const auto idx = p.fold_indices(f);
      CHECK(idx.size() == 2);
      const auto zeros = std::count_if(idx.begin(), idx.end(), [&](auto i) { return d.labels[i] == 0; });
      CHECK((zeros == 1 || zeros == 2));
    }
    CHECK(p.assignments == stratified_kfold(d, 5, 3).assignments);
    CHECK(p.warnings.size() == 1);  // class 1 has fewer than 5
  }
  SUBCASE("100 balanced samples") {
    std::vector<int> labels(100);
    for (int i = 0; i < 100; ++i) labels[i] = i % 2;
    const Dataset d = labelled(labels);
    const FoldPlan p = stratified_kfold(d, 5, 9);
    for (int f = 0; f < 5; ++f) {
      int per[2] = {0, 0};
      for (auto i : p.fold_indices(f)) ++per[d.labels[i]];
      CHECK(per[0] == 10);
      CHECK(per[1] == 10);
    }
  }
  SUBCASE("per-class counts differ by at most one") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<int> labels(20 + uniform_below(rng, 200));
      for (auto& l : labels) l = static_cast<int>(uniform_below(rng, 3));
      const Dataset d = labelled(labels, 3);
      const int k = 2 + static_cast<int>(uniform_below(rng, 6));
      const FoldPlan p = stratified_kfold(d, k, trial);
      const auto totals = d.class_counts();
      for (int f = 0; f < k; ++f) {
        std::vector<double> per(3, 0.0);
        for (auto i : p.fold_indices(f)) per[d.labels[i]] += 1;
        for (int c = 0; c < 3; ++c) CHECK(std::fabs(per[c] - totals[c] / double(k)) < 1.0);
      }
    }
  }
  CHECK_THROWS_AS(stratified_kfold(labelled({0, 1}), 1, 0), ConfigError);
}

TEST_CASE("sample_shots") {
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) labels[i] = i % 5 == 0 ? 1 : 0;
  const Dataset d = labelled(labels);
  const FoldPlan p = stratified_kfold(d, 5, 1);

  SUBCASE("stratified 4 shots gives 2 per class") {
    const auto s = sample_shots(d, p, 0, 4, 7);
    int per[2] = {0, 0};
    for (auto i : s.train_indices) ++per[d.labels[i]];
    CHECK(per[0] == 2);
    CHECK(per[1] == 2);
  }
  SUBCASE("odd remainder goes to the frequent class") {
    const auto s = sample_shots(d, p, 0, 5, 7);
    int per[2] = {0, 0};
    for (auto i : s.train_indices) ++per[d.labels[i]];
    CHECK(per[0] == 3);
    CHECK(per[1] == 2);
  }
  SUBCASE("all") {
    const auto s = sample_shots(d, p, 2, parse_shots("all"), 7);
    CHECK(s.train_indices == p.complement_indices(2));
    CHECK(s.valid_indices.empty());
  }
  SUBCASE("deterministic, disjoint, no leakage") {
    for (int fold = 0; fold < 5; ++fold) {
      for (auto mode : {ShotSampling::stratified, ShotSampling::uniform}) {
        const auto a = sample_shots(d, p, fold, 32, 11, mode);
        const auto b = sample_shots(d, p, fold, 32, 11, mode);
        CHECK(a.train_indices == b.train_indices);
        CHECK(a.train_indices.size() == 32);
        std::set<std::size_t> train(a.train_indices.begin(), a.train_indices.end());
        for (auto v : a.valid_indices) CHECK(train.count(v) == 0);
        for (auto t : p.fold_indices(fold)) CHECK(train.count(t) == 0);
        CHECK(a.train_indices.size() + a.valid_indices.size() == p.complement_indices(fold).size());
      }
    }
    CHECK(sample_shots(d, p, 0, 32, 11).train_indices != sample_shots(d, p, 0, 32, 12).train_indices);
  }
  SUBCASE("a class that is scarce gives up its quota") {
    std::vector<int> few(50, 0);
    few[0] = 1;
    few[1] = 1;
    const Dataset dd = labelled(few);
    const FoldPlan pp = stratified_kfold(dd, 2, 0);
    const auto s = sample_shots(dd, pp, 0, 10, 1);
    CHECK(s.train_indices.size() == 10);
  }
  CHECK_THROWS_AS(sample_shots(d, p, 0, 0, 1), ConfigError);
  CHECK_THROWS_AS(sample_shots(d, p, 5, 4, 1), ConfigError);
  CHECK(parse_shots("128") == 128);
  CHECK(shots_label(SIZE_MAX) == "all");
  CHECK_THROWS_AS(parse_shots("0"), ConfigError);
  CHECK_THROWS_AS(parse_shots("12x"), ConfigError);
}

TEST_CASE("util") {
  // published FNV-1a 64 test vectors
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");

  CHECK(format_number(30.0) == "30");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(-2.5) == "-2.5");
  CHECK(format_number(1e20) == "1e+20");

  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(uniform_below(a, 7) == uniform_below(b, 7));
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform_unit(r);
    CHECK((u >= 0.0 && u < 1.0));
  }
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
  CHECK(trim("  x y \t") == "x y");
}
