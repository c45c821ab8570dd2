#include <catch2/catch_amalgamated.hpp>

#include "dynbl/panels.hpp"
#include "test_util.hpp"

using namespace dynbl;
using testutil::TempDir;
using testutil::write_file;

TEST_CASE("load_price_csv parses a small wide file") {
    TempDir dir("prices");
    write_file(dir.file("p.csv"),
               "date,A,B\n2020-01-01,100,50\n2020-01-02,101,49.5\n2020-01-03,102,50.25\n");
    const auto p = load_price_csv(dir.file("p.csv"));
    REQUIRE(p.dates.size() == 3);
    REQUIRE(p.tickers == std::vector<std::string>{"A", "B"});
    CHECK(p.prices(0, 0) == 100.0);
    CHECK(p.prices(2, 1) == 50.25);
}

TEST_CASE("load_price_csv rejects bad input") {
    TempDir dir("prices_bad");
    SECTION("missing file") {
        CHECK_THROWS_AS(load_price_csv(dir.file("nope.csv")), DataError);
    }
    SECTION("zero price") {
        write_file(dir.file("p.csv"), "date,A\n2020-01-01,0.0\n");
        CHECK_THROWS_WITH(load_price_csv(dir.file("p.csv")),
                          Catch::Matchers::ContainsSubstring("non-positive price"));
    }
    SECTION("duplicate date") {
        write_file(dir.file("p.csv"), "date,A\n2020-01-01,1\n2020-01-01,2\n");
        CHECK_THROWS_WITH(load_price_csv(dir.file("p.csv")),
                          Catch::Matchers::ContainsSubstring("duplicate date"));
    }
    SECTION("malformed header") {
        write_file(dir.file("p.csv"), "day,A\n2020-01-01,1\n");
        CHECK_THROWS_AS(load_price_csv(dir.file("p.csv")), DataError);
    }
}

TEST_CASE("load_price_csv sorts out-of-order rows") {
    TempDir dir("prices_sort");
    write_file(dir.file("shuffled.csv"),
               "date,A\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n");
    write_file(dir.file("sorted.csv"),
               "date,A\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n");
    const auto a = load_price_csv(dir.file("shuffled.csv"));
    const auto b = load_price_csv(dir.file("sorted.csv"));
    CHECK(a.dates == b.dates);
    CHECK(a.prices == b.prices);
}

TEST_CASE("load_factor_csv canonical layouts") {
    TempDir dir("factors");
    write_file(dir.file("ff5.csv"),
               "date,MKTRF,SMB,HML,RMW,CMA,rf\n"
               "2020-01-01,0.01,0.002,-0.001,0.0005,0.0002,0.0001\n"
               "2020-01-02,-0.005,0.001,0.002,-0.0003,0.0001,0.0001\n");
    const auto ff5 = load_factor_csv(dir.file("ff5.csv"), FactorModelId::ff5);
    REQUIRE(ff5.values.cols() == 5);
    CHECK(ff5.names == factor_names(FactorModelId::ff5));
    CHECK(ff5.rf(0) == 0.0001);

    write_file(dir.file("c4.csv"),
               "date,UMD,MKTRF,SMB,HML,rf\n"
               "2020-01-01,0.003,0.01,0.002,-0.001,0.0001\n"
               "2020-01-02,0.001,-0.005,0.001,0.002,0.0001\n");
    const auto c4 = load_factor_csv(dir.file("c4.csv"), FactorModelId::carhart4);
    REQUIRE(c4.values.cols() == 4);
    CHECK(c4.names.back() == "UMD");
    CHECK(c4.values(0, 3) == 0.003); // UMD reordered to last

    write_file(dir.file("missing.csv"),
               "date,MKTRF,SMB,HML,RMW,rf\n2020-01-01,0,0,0,0,0\n");
    CHECK_THROWS_WITH(load_factor_csv(dir.file("missing.csv"), FactorModelId::ff5),
                      Catch::Matchers::ContainsSubstring("CMA"));
}

TEST_CASE("compute_returns basic cases") {
    PricePanel p;
    p.tickers = {"A"};
    SECTION("single step") {
        p.dates = {"2020-01-01", "2020-01-02"};
        p.prices.resize(2, 1);
        p.prices << 100, 110;
        const auto r = compute_returns(p);
        REQUIRE(r.returns.rows() == 1);
        CHECK_THAT(r.returns(0, 0), Catch::Matchers::WithinAbs(0.10, 1e-15));
        CHECK(r.dates == std::vector<std::string>{"2020-01-02"});
    }
    SECTION("constant prices give zero returns") {
        p.dates = {"2020-01-01", "2020-01-02", "2020-01-03"};
        p.prices.resize(3, 1);
        p.prices << 42, 42, 42;
        CHECK(compute_returns(p).returns.isZero(0.0));
    }
    SECTION("hand arithmetic") {
        p.dates = {"2020-01-01", "2020-01-02", "2020-01-03"};
        p.prices.resize(3, 1);
        p.prices << 100, 120, 90;
        const auto r = compute_returns(p);
        CHECK_THAT(r.returns(0, 0), Catch::Matchers::WithinAbs(0.20, 1e-15));
        CHECK_THAT(r.returns(1, 0), Catch::Matchers::WithinAbs(-0.25, 1e-15));
    }
    SECTION("too few rows") {
        p.dates = {"2020-01-01"};
        p.prices.resize(1, 1);
        p.prices << 1;
        CHECK_THROWS_AS(compute_returns(p), DataError);
    }
}

TEST_CASE("returns reconstruct prices") {
    std::mt19937_64 rng(7);
    PricePanel p;
    p.tickers = {"A", "B", "C"};
    const int T = 40;
    for (int t = 0; t < T; ++t) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "2020-%02d-%02d", 1 + t / 28, 1 + t % 28);
        p.dates.emplace_back(buf);
    }
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    p.prices.resize(T, 3);
    for (int c = 0; c < 3; ++c) {
        double s = 100.0 * (c + 1);
        for (int t = 0; t < T; ++t) {
            p.prices(t, c) = s;
            s *= 1.0 + u(rng);
        }
    }
    const auto r = compute_returns(p);
    for (int c = 0; c < 3; ++c) {
        double s = p.prices(0, c);
        for (int t = 0; t < T - 1; ++t) {
            s *= 1.0 + r.returns(t, c);
            CHECK_THAT(s, Catch::Matchers::WithinRel(p.prices(t + 1, c), 1e-12));
        }
    }
}

static FactorPanel make_factors(const std::vector<std::string>& dates) {
    FactorPanel f;
    f.dates = dates;
    f.names = factor_names(FactorModelId::ff5);
    f.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(dates.size()), 5, 0.001);
    f.rf = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dates.size()), 0.0001);
    return f;
}

TEST_CASE("align restricts to common dates") {
    ReturnPanel r;
    r.tickers = {"A"};
    r.dates = {"2020-01-01", "2020-01-02", "2020-01-03"};
    r.returns.resize(3, 1);
    r.returns << 0.01, 0.02, 0.03;

    SECTION("identical dates unchanged") {
        const auto [ro, fo] = align(r, make_factors(r.dates));
        CHECK(ro.dates == r.dates);
        CHECK(ro.returns == r.returns);
        CHECK(fo.dates == r.dates);
    }
    SECTION("partial overlap") {
        const auto f = make_factors({"2020-01-02", "2020-01-03", "2020-01-04"});
        const auto [ro, fo] = align(r, f);
        CHECK(ro.dates == std::vector<std::string>{"2020-01-02", "2020-01-03"});
        CHECK(ro.returns(0, 0) == 0.02);
        CHECK(fo.dates == ro.dates);
    }
    SECTION("disjoint dates fail") {
        CHECK_THROWS_AS(align(r, make_factors({"2021-01-01", "2021-01-02"})), DataError);
    }
    SECTION("idempotent") {
        const auto f = make_factors({"2020-01-02", "2020-01-03", "2020-01-04"});
        const auto [r1, f1] = align(r, f);
        const auto [r2, f2] = align(r1, f1);
        CHECK(r2.dates == r1.dates);
        CHECK(r2.returns == r1.returns);
        CHECK(f2.values == f1.values);
        CHECK(f2.rf == f1.rf);
    }
}

TEST_CASE("price CSV round-trips bit-identically") {
    TempDir dir("roundtrip");
    std::mt19937_64 rng(11);
    PricePanel p;
    p.tickers = {"X", "Y"};
    std::uniform_real_distribution<double> u(1.0, 500.0);
    p.prices.resize(10, 2);
    for (int t = 0; t < 10; ++t) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "2021-03-%02d", t + 1);
        p.dates.emplace_back(buf);
        p.prices(t, 0) = u(rng);
        p.prices(t, 1) = u(rng);
    }
    write_price_csv(p, dir.file("a.csv"), 15);
    const auto loaded = load_price_csv(dir.file("a.csv"));
    write_price_csv(loaded, dir.file("b.csv"), 15);
    CHECK(testutil::read_file(dir.file("a.csv")) == testutil::read_file(dir.file("b.csv")));
}
