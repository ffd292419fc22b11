#include <catch_amalgamated.hpp>

#include <boil/stats.hpp>

#include <cmath>
#include <vector>

using namespace boil;

TEST_CASE("average_ranks") {
  CHECK(average_ranks({10.0, 20.0, 30.0}) == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(average_ranks({30.0, 10.0, 20.0}) == std::vector<double>{3.0, 1.0, 2.0});
  // tied values share the mean of the positions they occupy
  CHECK(average_ranks({1.0, 2.0, 2.0, 3.0}) == std::vector<double>{1.0, 2.5, 2.5, 4.0});
  CHECK(average_ranks({7.0, 7.0, 7.0, 7.0}) == std::vector<double>{2.5, 2.5, 2.5, 2.5});
  CHECK(average_ranks({}).empty());
}

TEST_CASE("spearman_rho") {
  CHECK(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}) == Catch::Approx(1.0).margin(1e-12));
  CHECK(spearman_rho({1, 2, 3, 4}, {8, 4, 2, 1}) == Catch::Approx(-1.0).margin(1e-12));
  // nonlinear but monotone still gives 1: only ranks matter
  CHECK(spearman_rho({1, 2, 3, 4}, {1, 100, 10000, 1e6}) == Catch::Approx(1.0).margin(1e-12));
  // ties on one side: ranks (1,2,3,4) vs (1.5,1.5,3.5,3.5) correlate at 2/sqrt(5)
  CHECK(spearman_rho({1, 2, 3, 4}, {1, 1, 2, 2}) ==
        Catch::Approx(0.89442719099991586).margin(1e-12));
  CHECK(spearman_rho({5, 5, 5}, {1, 2, 3}) == 0.0);
  CHECK(spearman_rho({1.0}, {2.0}) == 0.0);
  CHECK(spearman_rho({}, {}) == 0.0);
  CHECK_THROWS_AS(spearman_rho({1, 2}, {1, 2, 3}), InvalidInput);
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK(median({5}) == 5.0);
  CHECK(median({2, 2, 2, 9}) == 2.0);
  CHECK_THROWS_AS(median({}), InvalidInput);
}

TEST_CASE("sample_std") {
  CHECK(sample_std({2.0, 4.0}) == Catch::Approx(std::sqrt(2.0)).margin(1e-15));
  CHECK(sample_std({0, 0, 0, 0, 4, 4, 4, 4}) ==
        Catch::Approx(2.1380899352993952).margin(1e-12));  // sqrt(32/7)
  CHECK(sample_std({7.0}) == 0.0);
  CHECK(sample_std({3.0, 3.0, 3.0}) == 0.0);
  CHECK(sample_std({}) == 0.0);
}
