#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "dpmscreen/dataset.hpp"
#include "dpmscreen/stats.hpp"

using namespace dpmscreen;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dpmscreen_test_" + name)).string();
}

}  // namespace

TEST(Csv, MissingMask) {
  const auto d = parse_csv("a,b\n1,2\nNA,3\n4.5,-1e3\n");
  ASSERT_EQ(d.rows(), 3u);
  ASSERT_EQ(d.cols(), 2u);
  int set = 0;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t r = 0; r < 3; ++r) set += d.is_missing(r, c);
  EXPECT_EQ(set, 1);
  EXPECT_TRUE(d.is_missing(1, 0));
  EXPECT_EQ(d.value(2, 1), -1000.0);
  EXPECT_EQ(d.row_ids, (std::vector<std::string>{"1", "2", "3"}));
}

TEST(Csv, MissingTokens) {
  const auto d = parse_csv("a,b,c\n,NaN,nan\n1,2,3\n");
  EXPECT_TRUE(d.is_missing(0, 0));
  EXPECT_TRUE(d.is_missing(0, 1));
  EXPECT_TRUE(d.is_missing(0, 2));
  EXPECT_FALSE(d.is_missing(1, 2));
}

TEST(Csv, HeaderOnly) {
  const auto d = parse_csv("x,y,z\n");
  EXPECT_EQ(d.rows(), 0u);
  EXPECT_EQ(d.cols(), 3u);
}

TEST(Csv, Errors) {
  EXPECT_THROW(parse_csv("a,a\n1,2\n"), InputError);
  EXPECT_THROW(parse_csv("a,b\n1,2,3\n"), InputError);
  EXPECT_THROW(parse_csv("a,b\n1\n"), InputError);
  try {
    parse_csv("a,b\n1,x\nfoo,2\n");
    FAIL();
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("x"), std::string::npos);
    EXPECT_NE(msg.find("foo"), std::string::npos);
  }
  EXPECT_THROW(parse_csv("a\ninf\n"), InputError);
  EXPECT_THROW(load_csv("/nonexistent/dir/file.csv"), InputError);
}

TEST(Csv, QuotedFieldsAndIdColumn) {
  CsvOptions o;
  o.id_column = "country";
  const auto d = parse_csv("country,\"gdp, ppp\",life\n\"Côte d'Ivoire\",1.5,60\nPeru,2,NA\n", o);
  EXPECT_EQ(d.names, (std::vector<std::string>{"gdp, ppp", "life"}));
  EXPECT_EQ(d.row_ids, (std::vector<std::string>{"Côte d'Ivoire", "Peru"}));
  EXPECT_TRUE(d.is_missing(1, 1));
  o.id_column = "missing";
  EXPECT_THROW(parse_csv("a,b\n1,2\n", o), InputError);
}

TEST(Csv, DuplicateRowIds) {
  CsvOptions o;
  o.id_column = "id";
  EXPECT_THROW(parse_csv("id,a\nx,1\nx,2\n", o), InputError);
}

TEST(Csv, RoundTripBitExact) {
  RngStream r(1);
  Dataset d;
  d.names = {"alpha", "beta", "gamma"};
  for (int i = 0; i < 50; ++i) d.row_ids.push_back("r" + std::to_string(i));
  d.columns.assign(3, std::vector<double>(50));
  d.missing.assign(3, std::vector<std::uint8_t>(50, 0));
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 50; ++i) {
      d.columns[c][i] = sample_normal(0.0, 1.0, r) * std::pow(10.0, (i % 30) - 15);
      if ((i + c) % 11 == 0) {
        d.columns[c][i] = std::numeric_limits<double>::quiet_NaN();
        d.missing[c][i] = 1;
      }
    }
  }
  d.columns[0][1] = std::numeric_limits<double>::denorm_min();
  d.columns[1][1] = -std::numeric_limits<double>::max();
  const auto path = temp_path("roundtrip.csv");
  write_csv(d, path);
  CsvOptions o;
  o.id_column = "id";
  const auto back = load_csv(path, o);
  std::remove(path.c_str());
  ASSERT_EQ(back.names, d.names);
  ASSERT_EQ(back.row_ids, d.row_ids);
  EXPECT_EQ(back.missing, d.missing);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 50; ++i)
      if (!d.missing[c][i]) EXPECT_EQ(back.columns[c][i], d.columns[c][i]);
}

TEST(Dataset, SortedByRowId) {
  CsvOptions o;
  o.id_column = "id";
  const auto d = parse_csv("id,a\n10,1\n9,2\n100,3\n", o);
  const auto s = d.sorted_by_row_id();
  EXPECT_EQ(s.row_ids, (std::vector<std::string>{"9", "10", "100"}));
  EXPECT_EQ(s.columns[0], (std::vector<double>{2, 1, 3}));
  const auto t = parse_csv("id,a\nb,1\na,2\nc,3\n", o).sorted_by_row_id();
  EXPECT_EQ(t.row_ids, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Dataset, SelectAndIndex) {
  const auto d = parse_csv("a,b,c\n1,2,3\n");
  EXPECT_EQ(d.column_index("c"), 2u);
  EXPECT_THROW(d.column_index("z"), InputError);
  const auto s = d.select({"c", "a"});
  EXPECT_EQ(s.names, (std::vector<std::string>{"c", "a"}));
  EXPECT_EQ(s.value(0, 0), 3.0);
  EXPECT_THROW(d.select({"q"}), InputError);
}

TEST(Numbers, FormatParse) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    const auto s = format_double(v);
    ASSERT_TRUE(parse_double(s).has_value());
    EXPECT_EQ(*parse_double(s), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_FALSE(parse_double("1.5x").has_value());
  EXPECT_FALSE(parse_double("").has_value());
  EXPECT_FALSE(parse_double("abc").has_value());
  EXPECT_EQ(*parse_double(" 2.5 "), 2.5);
}
