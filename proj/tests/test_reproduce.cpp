#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "ssrmap/errors.hpp"
#include "ssrmap/reference_configs.hpp"
#include "ssrmap/reproduce.hpp"

using namespace ssrmap;

namespace {

long lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

}  // namespace

TEST_CASE("exhibit ids") {
    CHECK(reproduce::exhibit_ids().size() == 8);
    try {
        reproduce::run("fig7", {});
        FAIL("expected an error");
    } catch (const InvalidArgument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("fig1") != std::string::npos);
        CHECK(msg.find("table2") != std::string::npos);
    }
}

TEST_CASE("deterministic exhibits") {
    for (auto id : {"fig1", "fig2", "fig6", "table1", "table2"}) {
        const auto a = reproduce::run(id, {});
        const auto b = reproduce::run(id, {});
        REQUIRE(a.size() == 1);
        CHECK(a[0].csv == b[0].csv);
        CHECK(a[0].file_name == std::string(id) + ".csv");
    }
    CHECK(lines(reproduce::run("fig1", {})[0].csv) == 1 + 3 * 91);
    CHECK(lines(reproduce::run("fig6", {})[0].csv) == 1 + 2 * 3 * 21);
    CHECK(lines(reproduce::run("table1", {})[0].csv) == 4);
}

TEST_CASE("example curves rise with the observed variance") {
    const std::vector<long> n1{25, 75, 125};
    const std::vector<double> vars{15, 30, 45, 60, 90};
    const auto rows = reproduce::reestimation_curve(reference::st_johns_prior(), reference::kStJohnsDelta, n1, vars);
    CHECK(rows.size() == 15);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].n1 != rows[i - 1].n1) continue;
        CHECK(rows[i].n_pooled >= rows[i - 1].n_pooled);
        CHECK(rows[i].n_bayes_mean >= rows[i - 1].n_bayes_mean);
        CHECK(rows[i].n_bayes_median >= rows[i - 1].n_bayes_median);
    }
}

TEST_CASE("table summaries from the printed mixtures") {
    const auto rows = reproduce::mixture_summary(reference::blood_pressure_prior());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].parameter == "sigma2");
    CHECK(rows[0].mean == doctest::Approx(251.47).epsilon(0.05));
    CHECK(rows[1].median == doctest::Approx(15.64).epsilon(0.05));
    CHECK(rows[2].q975 == doctest::Approx(0.0063).epsilon(0.05));
}

TEST_CASE("study grids have the documented sizes") {
    reproduce::Options opt;
    opt.replications = 10;
    auto size = [](const reproduce::Grid& g) { return expand_grid(g.base, g.sweeps).size(); };
    CHECK(size(reproduce::no_conflict_grid(opt)) == 90);
    CHECK(size(reproduce::conflict_grid(opt)) == 120);
    CHECK(size(reproduce::robust_grid(opt)) == 76);
    const auto fig3 = reproduce::run("fig3", opt);
    CHECK(lines(fig3[0].csv) == 91);
}
