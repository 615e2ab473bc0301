#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vi2d/io.hpp"
#include "vi2d/rng.hpp"

using Catch::Approx;
using namespace vi2d;

TEST_CASE("seventeen-digit formatting round trips doubles exactly") {
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-12.0, 12.0));
        const double back = io::parse_double(io::format_double(v), "test");
        CHECK(back == v);
    }
    CHECK(io::parse_double(io::format_double(0.0), "test") == 0.0);
    CHECK(io::parse_double("-1.5e-300", "test") == -1.5e-300);
    CHECK_THROWS_AS(io::parse_double("abc", "test"), io::IoError);
    CHECK_THROWS_AS(io::parse_double("1.5x", "test"), io::IoError);
}

TEST_CASE("csv series round trips losslessly") {
    Rng rng(5);
    MultivariateSeries x(3, 7);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const std::string text = io::format_csv_series(x, {"a", "b", "c"});
    const io::CsvSeries back = io::parse_csv_series(text);
    REQUIRE(back.names == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(back.series.rows() == 3);
    REQUIRE(back.series.cols() == 7);
    CHECK(back.series == x);

    const std::string headerless = io::format_csv_series(x);
    const io::CsvSeries back2 = io::parse_csv_series(headerless);
    CHECK(back2.names.empty());
    CHECK(back2.series == x);
}

TEST_CASE("csv uses LF endings and a dot decimal point") {
    MultivariateSeries x(2, 1);
    x(0, 0) = 1.5;
    x(1, 0) = -2.25;
    const std::string text = io::format_csv_series(x);
    CHECK(text == "1.5,-2.25\n");
    CHECK(text.find('\r') == std::string::npos);
}

TEST_CASE("csv parse errors carry line numbers") {
    CHECK_THROWS_WITH(io::parse_csv_series("1.0,2.0\n3.0\n", "input"),
                      Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_WITH(io::parse_csv_series("1.0,2.0\n3.0,oops\n", "input"),
                      Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_AS(io::parse_csv_series("", "input"), io::IoError);
    CHECK_THROWS_WITH(io::parse_csv_series("a,b\n", "input"),
                      Catch::Matchers::ContainsSubstring("no data"));
    CHECK_THROWS_WITH(io::parse_csv_series("1.0,inf\n", "input"),
                      Catch::Matchers::ContainsSubstring("non-finite"));
}

TEST_CASE("key-value documents parse comments, blanks, and overrides") {
    const std::string text =
        "# comment line\n"
        "alpha = 1.5\n"
        "\n"
        "name = 3 4 5   # trailing comment\n"
        "alpha = 2.5\n";
    const io::KeyValueDoc doc = io::KeyValueDoc::parse(text);
    CHECK(doc.get_double("alpha") == 2.5);  // later assignment wins
    const auto values = doc.get_values("name");
    REQUIRE(values.size() == 3);
    CHECK(values[1] == 4.0);
    CHECK_THROWS_AS(doc.get("missing"), io::IoError);
    CHECK_THROWS_WITH(io::KeyValueDoc::parse("novalue\n", "cfg"),
                      Catch::Matchers::ContainsSubstring("line 1"));
}

TEST_CASE("key-value matrices round trip bit for bit") {
    Rng rng(7);
    Matrix m(3, 4);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * 1e3;
    io::KeyValueDoc doc;
    doc.set_matrix("block", m);
    doc.set_count("rows", m.rows());
    const io::KeyValueDoc back = io::KeyValueDoc::parse(doc.serialize());
    CHECK(back.get_count("rows") == 3);
    CHECK(back.get_matrix("block", 3, 4) == m);
    CHECK_THROWS_AS(back.get_matrix("block", 2, 4), io::IoError);
}

TEST_CASE("generic csv tables round trip byte for byte") {
    const io::CsvTable table{{"engine", "C", "median_seconds", "mae", "mape"},
                             {"vi", "16", io::format_double(0.0093215), io::format_double(0.1),
                              io::format_double(2.5)},
                             {"ordered", "16", io::format_double(5.2e-05),
                              io::format_double(0.0991), io::format_double(2.44)}};
    const std::string text = io::format_csv_table(table);
    const io::CsvTable back = io::parse_csv_table(text);
    REQUIRE(back == table);
    CHECK(io::format_csv_table(back) == text);
    CHECK(io::parse_double(back[1][2], "cell") == 0.0093215);
}
