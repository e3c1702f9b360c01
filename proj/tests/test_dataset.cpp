#include "gwe/dataset.hpp"
#include "gwe/stats.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>
#include <set>
#include <sstream>

using namespace gwe;
using data::ColumnKind;

namespace {

data::Schema numeric_schema() {
  return {{"a", ColumnKind::numeric, {}}, {"b", ColumnKind::numeric, {}}, {"loan_status", ColumnKind::label, {}}};
}

data::Dataset parse(const std::string& csv, const data::Schema& schema) {
  std::istringstream in(csv);
  return data::ingest_csv(in, schema);
}

}  // namespace

TEST_CASE("three numeric rows parse as given") {
  const auto d = parse("a,b,loan_status\n1,2,Fully Paid\n3.5,-4,Charged Off\n5,6e2,Fully Paid\n", numeric_schema());
  REQUIRE(d.rows() == 3);
  CHECK(d.columns[0].numbers == std::vector<double>{1, 3.5, 5});
  CHECK(d.columns[1].numbers == std::vector<double>{2, -4, 600});
  CHECK(d.label == Labels{1, 0, 1});
}

TEST_CASE("all fully paid maps to all ones") {
  const auto d = parse("a,b,loan_status\n1,2,Fully Paid\n3,4,Fully Paid\n", numeric_schema());
  CHECK(d.label == Labels{1, 1});
}

TEST_CASE("ingest errors name the problem") {
  CHECK_THROWS_WITH(parse("a,c,loan_status\n1,2,Fully Paid\n", numeric_schema()), Catch::Matchers::ContainsSubstring("header"));
  CHECK_THROWS_WITH(parse("a,b,loan_status\n1,x,Fully Paid\n", numeric_schema()), Catch::Matchers::ContainsSubstring("row 1"));
  CHECK_THROWS_WITH(parse("a,b,loan_status\n1,2,Current\n", numeric_schema()), Catch::Matchers::ContainsSubstring("Current"));
}

TEST_CASE("quoted fields with commas and newlines") {
  data::Schema s = {{"note", ColumnKind::ignore, {}}, {"a", ColumnKind::numeric, {}}, {"loan_status", ColumnKind::label, {}}};
  const auto d = parse("note,a,loan_status\n\"x, \"\"y\"\"\nz\",1,Fully Paid\n", s);
  CHECK(d.rows() == 1);
  CHECK(d.schema.size() == 2);
}

TEST_CASE("drop_missing removes rows with any missing token") {
  std::string csv = "a,b,loan_status\n";
  const char* missing[] = {"", "NA", "nan", "NULL"};
  for (int i = 0; i < 10; ++i) {
    std::string b = std::to_string(i);
    if (i == 3) b = missing[i % 4];
    if (i == 7) b = missing[(i + 1) % 4];
    csv += std::to_string(i) + "," + b + ",Fully Paid\n";
  }
  data::DropReport rep;
  const auto d = data::drop_missing(parse(csv, numeric_schema()), &rep);
  CHECK(d.rows() == 8);
  CHECK(rep.rows_before == 10);
  CHECK(rep.retained_fraction() == Catch::Approx(0.8));

  const auto clean = parse("a,b,loan_status\n1,2,Fully Paid\n", numeric_schema());
  CHECK(data::drop_missing(clean).columns[0].numbers == clean.columns[0].numbers);
  CHECK_THROWS_AS(data::drop_missing(parse("a,b,loan_status\nNA,2,Fully Paid\n", numeric_schema())), Error);
}

TEST_CASE("one-hot layout and widths") {
  data::Schema s = {{"n1", ColumnKind::numeric, {}}, {"c1", ColumnKind::categorical, {}},
                    {"n2", ColumnKind::numeric, {}}, {"c2", ColumnKind::categorical, {}},
                    {"n3", ColumnKind::numeric, {}}, {"n4", ColumnKind::numeric, {}},
                    {"loan_status", ColumnKind::label, {}}};
  const auto d = parse(
      "n1,c1,n2,c2,n3,n4,loan_status\n"
      "1,B,2,y,3,4,Fully Paid\n"
      "5,C,6,x,7,8,Charged Off\n"
      "9,A,10,x,11,12,Fully Paid\n",
      s);
  const auto m = data::encode(d);
  // 4 numeric + 3 + 2 indicators
  REQUIRE(m.cols() == 4 + 3 + 2);
  CHECK(m.feature_names[1] == "c1=A");
  CHECK(m.feature_names[2] == "c1=B");
  CHECK(m.X(0, 2) == 1.0);
  CHECK(m.X(0, 1) == 0.0);
  for (const auto& g : m.groups)
    if (g.kind == data::FeatureKind::indicator)
      for (Eigen::Index i = 0; i < m.X.rows(); ++i) CHECK(m.X.row(i).segment(g.first, g.width).sum() == 1.0);
  const auto mask = m.numeric_mask();
  CHECK(std::count(mask.begin(), mask.end(), true) == 4);
}

TEST_CASE("allowed categories are enforced") {
  data::Schema s = {{"c", ColumnKind::categorical, {"A", "B"}}, {"loan_status", ColumnKind::label, {}}};
  CHECK_THROWS_AS(data::encode(parse("c,loan_status\nZ,Fully Paid\n", s)), Error);
  const auto m = data::encode(parse("c,loan_status\nA,Fully Paid\n", s));
  CHECK(m.cols() == 2);
  CHECK(m.X(0, 0) == 1.0);
  CHECK(m.X(0, 1) == 0.0);
}

TEST_CASE("unknown category encodes as zeros when not strict") {
  data::Schema s = {{"c", ColumnKind::categorical, {}}, {"loan_status", ColumnKind::label, {}}};
  const auto enc = data::Encoder::fit(parse("c,loan_status\nA,Fully Paid\nB,Charged Off\n", s));
  const auto other = parse("c,loan_status\nQ,Fully Paid\n", s);
  CHECK(enc.transform(other, false).X.row(0).sum() == 0.0);
  CHECK_THROWS_AS(enc.transform(other, true), Error);
}

TEST_CASE("split sizes and stratification") {
  Labels y10(10, 0);
  y10[0] = y10[1] = y10[2] = 1;
  CHECK(data::split(y10, 0.2, 42).test_indices.size() == 2);

  Labels y(100, 0);
  std::fill(y.begin(), y.begin() + 30, 1);
  const auto s = data::split(y, 0.2, 42);
  CHECK(s.test_indices.size() == 20);
  const auto pos = stats::count_label(stats::take(y, s.test_indices), 1);
  CHECK(pos >= 5);
  CHECK(pos <= 7);
  std::set<std::size_t> all(s.train_indices.begin(), s.train_indices.end());
  for (auto i : s.test_indices) CHECK(all.insert(i).second);
  CHECK(all.size() == 100);

  const auto again = data::split(y, 0.2, 42);
  CHECK(again.test_indices == s.test_indices);
  Labels lonely(10, 0);
  lonely[0] = 1;
  CHECK_THROWS_AS(data::split(lonely, 0.2, 1), Error);
}

TEST_CASE("random missing injection never leaks non-finite values") {
  const auto schema = data::synthetic_schema();
  for (std::uint64_t seed : {1, 2, 3}) {
    data::SyntheticOptions o;
    o.rows = 300;
    o.seed = seed;
    o.missing_rate = 0.05;
    std::stringstream csv;
    data::write_synthetic_csv(csv, o);
    const auto m = data::encode(data::drop_missing(data::ingest_csv(csv, schema)));
    CHECK(m.X.allFinite());
    CHECK(m.X.rows() > 0);
  }
}

TEST_CASE("matrix csv and groups round trip exactly") {
  testing::TempDir tmp("dataset");
  data::SyntheticOptions o;
  o.rows = 200;
  std::stringstream csv;
  data::write_synthetic_csv(csv, o);
  const auto m = data::encode(data::drop_missing(data::ingest_csv(csv, data::synthetic_schema())));
  data::write_matrix_csv(tmp.path() / "m.csv", m);
  data::write_groups(tmp.path() / "g.txt", m.groups);
  const auto back = data::read_matrix_csv(tmp.path() / "m.csv");
  CHECK(back.X == m.X);
  CHECK(back.y == m.y);
  CHECK(back.feature_names == m.feature_names);
  const auto groups = data::read_groups(tmp.path() / "g.txt");
  REQUIRE(groups.size() == m.groups.size());
  CHECK(groups.back().categories == m.groups.back().categories);

  const auto s = data::split(m, 0.2, 7);
  data::write_split(tmp.path() / "s.txt", s);
  const auto s2 = data::read_split(tmp.path() / "s.txt");
  CHECK(s2.test_indices == s.test_indices);
  CHECK(s2.train_indices == s.train_indices);
}

TEST_CASE("pipeline front half is byte-identical across runs") {
  auto once = [] {
    data::SyntheticOptions o;
    o.rows = 400;
    std::stringstream csv;
    data::write_synthetic_csv(csv, o);
    const auto m = data::encode(data::drop_missing(data::ingest_csv(csv, data::synthetic_schema())));
    const auto s = data::split(m, 0.2, 42);
    std::ostringstream out;
    data::write_matrix_csv(out, data::subset(m, s.test_indices));
    return out.str();
  };
  CHECK(once() == once());
}

TEST_CASE("synthetic generator hits its default rate") {
  data::SyntheticOptions o;
  o.rows = 5000;
  o.missing_rate = 0.0;
  std::stringstream csv;
  data::write_synthetic_csv(csv, o);
  const auto d = data::ingest_csv(csv, data::synthetic_schema());
  const double charged_off = static_cast<double>(stats::count_label(d.label, 0)) / static_cast<double>(d.rows());
  CHECK(charged_off == Catch::Approx(0.2).margin(0.02));
}

TEST_CASE("schema files parse and validate") {
  std::istringstream in("# comment\n\na,numeric\ng,categorical,B|A\nloan_status,label\n");
  const auto s = data::parse_schema(in);
  REQUIRE(s.size() == 3);
  CHECK(s[1].allowed_categories == std::vector<std::string>{"B", "A"});
  std::istringstream two_labels("a,label\nb,label\n");
  CHECK_THROWS_AS(data::parse_schema(two_labels), Error);
  std::istringstream dup("a,numeric\na,numeric\nl,label\n");
  CHECK_THROWS_AS(data::parse_schema(dup), Error);
}
