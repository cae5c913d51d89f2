#include "evalguard/csv.hpp"
#include "evalguard/error.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace evalguard;

TEST_SUITE("csv") {

TEST_CASE("quoted fields, embedded commas, quotes and newlines")
{
    const auto t = csv::parse("a,b,c\n\"x,1\",\"say \"\"hi\"\"\",\"two\nlines\"\n");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][0] == "x,1");
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(t.rows[0][2] == "two\nlines");
}

TEST_CASE("BOM, CRLF and blank lines")
{
    const auto t = csv::parse("\xEF\xBB\xBFid,v\r\n1,2\r\n\r\n3,4\r\n");
    CHECK(t.header == std::vector<std::string>{"id", "v"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][1] == "4");
    CHECK(t.find("v") == 1u);
    CHECK_FALSE(t.find("w").has_value());
}

TEST_CASE("ragged rows and empty input are rejected")
{
    CHECK_THROWS_AS(csv::parse("a,b\n1,2,3\n"), InputError);
    CHECK_THROWS_AS(csv::parse(""), InputError);
    CHECK_THROWS_AS(csv::parse("a,b\n1\"x\",2\n"), InputError);
}

TEST_CASE("strict number parsing")
{
    CHECK(csv::parse_double("1.5") == 1.5);
    CHECK(csv::parse_double(" -2e3 ") == -2000.0);
    CHECK_FALSE(csv::parse_double("").has_value());
    CHECK_FALSE(csv::parse_double("1,5").has_value());
    CHECK_FALSE(csv::parse_double("12abc").has_value());
    CHECK_FALSE(csv::parse_double("nan").has_value());
    CHECK_FALSE(csv::parse_double("inf").has_value());
}

TEST_CASE("format_double round-trips exactly")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        CHECK(csv::parse_double(csv::format_double(x)) == x);
    }
    CHECK(csv::format_double(0.1) == "0.1");
    CHECK(csv::format_double(67.0) == "67");
}

TEST_CASE("escape quotes only when needed")
{
    CHECK(csv::escape("plain") == "plain");
    CHECK(csv::escape("a,b") == "\"a,b\"");
    CHECK(csv::escape("q\"") == "\"q\"\"\"");
}

}
