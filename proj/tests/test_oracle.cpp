#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <numbers>
#include <random>

#include "cavcool/oracle.hpp"
#include "cavcool/spin.hpp"

using namespace cavcool;

namespace {

LiouvillianSpec make_spec(std::vector<double> x, double w, double gc = 0.1, double gd = 0.1) {
  LiouvillianSpec s;
  s.gamma_c = gc;
  s.gamma_delta = gd;
  s.w = w;
  s.positions = std::move(x);
  return s;
}

CMatrix random_density(int n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  const Eigen::Index dim = Eigen::Index{1} << n;
  CMatrix a(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = cplx(normal(gen), normal(gen));
  }
  CMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

}  // namespace

TEST_CASE("generator preserves trace") {
  const LiouvillianSpec spec = make_spec({0.0, 0.7, 2.1}, 0.15);
  const CMatrix gen = build_generator(spec);
  CHECK(gen.rows() == 64);
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const CMatrix d = unvectorize(gen * vectorize(random_density(3, seed)));
    CHECK(std::abs(d.trace()) < 1e-14);
  }
}

TEST_CASE("single-atom generator spectrum") {
  const double x = 0.4;
  const LiouvillianSpec spec = make_spec({x}, 0.15);
  const double c2 = std::cos(x) * std::cos(x);
  const double total = 0.15 + 0.1 * c2;
  Eigen::ComplexEigenSolver<CMatrix> es(build_generator(spec));
  std::vector<double> re;
  for (Eigen::Index i = 0; i < 4; ++i) re.push_back(es.eigenvalues()(i).real());
  std::sort(re.begin(), re.end());
  CHECK(std::abs(re[3]) < 1e-14);
  CHECK(re[0] == doctest::Approx(-total).epsilon(1e-12));
  CHECK(re[1] == doctest::Approx(-total / 2).epsilon(1e-12));
  CHECK(re[2] == doctest::Approx(-total / 2).epsilon(1e-12));
}

TEST_CASE("pure decay at an antinode") {
  const LiouvillianSpec spec = make_spec({0.0}, 0.0, 0.1, 0.0);
  const CMatrix gen = build_generator(spec);
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(1, 1) = 1.0;
  for (double t : {1.0, 5.0, 20.0}) {
    CHECK(moments_from_rho(evolve(gen, rho, t)).pop()[0] == doctest::Approx(std::exp(-0.1 * t)).epsilon(1e-12));
  }
}

TEST_CASE("steady states") {
  SUBCASE("single atom at an antinode") {
    const LiouvillianSpec spec = make_spec({0.0}, 0.15);
    const SteadyStateResult ss = steady_state(build_generator(spec), spec.positions);
    CHECK(ss.null_multiplicity == 1);
    CHECK(ss.residual <= 1e-10);
    CHECK(moments_from_rho(ss.state.rho).pop()[0] == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("single atom at a node is fully inverted") {
    const LiouvillianSpec spec = make_spec({std::numbers::pi / 2.0}, 0.15);
    const SteadyStateResult ss = steady_state(build_generator(spec), spec.positions);
    CHECK(moments_from_rho(ss.state.rho).pop()[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two atoms at antinodes") {
    // Null-space solve of the 16x16 generator at w = 1.5 Gamma_C, Gamma_Delta = Gamma_C.
    const LiouvillianSpec spec = make_spec({0.0, 0.0}, 0.15);
    const SteadyStateResult ss = steady_state(build_generator(spec), spec.positions);
    const SpinMoments m = moments_from_rho(ss.state.rho);
    CHECK(m.pop()[0] == doctest::Approx(25.0 / 43.0).epsilon(1e-12));
    CHECK(m.pop()[1] == doctest::Approx(25.0 / 43.0).epsilon(1e-12));
    CHECK(std::abs(m.pair(0, 1) - cplx(2.0 / 43.0, 0.0)) < 1e-12);
    CHECK(ss.residual <= 1e-10);
  }
  SUBCASE("two atoms at antinodes with w = Gamma_C are uncorrelated") {
    const LiouvillianSpec spec = make_spec({0.0, 0.0}, 0.1);
    const SpinMoments m = moments_from_rho(steady_state(build_generator(spec), spec.positions).state.rho);
    CHECK(m.pop()[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(m.pair(0, 1)) < 1e-12);
  }
  SUBCASE("no pump leaves a degenerate null space") {
    const LiouvillianSpec spec = make_spec({0.0, 0.0}, 0.0);
    CHECK(steady_state(build_generator(spec), spec.positions).null_multiplicity > 1);
  }
}

TEST_CASE("evolution keeps a valid density matrix") {
  const LiouvillianSpec spec = make_spec({0.3, 1.2, 2.0}, 0.2);
  const CMatrix gen = build_generator(spec);
  const CMatrix rho = evolve(gen, random_density(3, 7), 13.0);
  CHECK(std::abs(rho.trace() - 1.0) < 1e-12);
  CHECK((rho - rho.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()));
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("moments from density matrices") {
  CMatrix ground = CMatrix::Zero(4, 4);
  ground(0, 0) = 1.0;
  const SpinMoments g = moments_from_rho(ground);
  CHECK(g.pop()[0] == 0.0);
  CHECK(g.pop()[1] == 0.0);
  CHECK(g.coh()[0] == cplx(0.0, 0.0));

  // Equal mixture of the symmetric single-excitation state and |ee>:
  // pop = 1/2 * 1/2 + 1/2 = 3/4, <s1+ s2-> = 1/2 * 1/2 = 1/4.
  CMatrix rho = CMatrix::Zero(4, 4);
  rho(1, 1) = rho(2, 2) = rho(1, 2) = rho(2, 1) = 0.25;
  rho(3, 3) = 0.5;
  const SpinMoments m = moments_from_rho(rho);
  CHECK(m.pop()[0] == doctest::Approx(0.75));
  CHECK(m.pop()[1] == doctest::Approx(0.75));
  CHECK(std::abs(m.pair(0, 1) - cplx(0.25, 0.0)) < 1e-15);
  CHECK(m.pair(1, 0) == std::conj(m.pair(0, 1)));
}

TEST_CASE("swapping atoms at equal positions commutes with the generator") {
  const LiouvillianSpec spec = make_spec({0.5, 0.5}, 0.15);
  const CMatrix gen = build_generator(spec);
  CMatrix swap = CMatrix::Zero(4, 4);
  swap(0, 0) = swap(3, 3) = 1.0;
  swap(1, 2) = swap(2, 1) = 1.0;
  const CMatrix rho = random_density(2, 3);
  const CMatrix a = unvectorize(gen * vectorize(swap * rho * swap));
  const CMatrix b = swap * unvectorize(gen * vectorize(rho)) * swap;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cumulant closure is exact for one atom") {
  for (double x : {0.0, 0.8}) {
    const DiscrepancyReport r = compare_cumulant(make_spec({x}, 0.15));
    CHECK(r.max_pointwise < 1e-8);
    CHECK(r.max_steady_rel < 1e-8);
  }
}

TEST_CASE("closure error vanishes for strong pumping") {
  const double small = compare_cumulant(make_spec({0.0, 0.0}, 0.15)).moments[0].rel_error;
  const double large = compare_cumulant(make_spec({0.0, 0.0}, 5.0)).moments[0].rel_error;
  CHECK(large < 0.1 * small);
  CHECK(large < 1e-3);
}

TEST_CASE("two-atom closure discrepancy fixture") {
  const DiscrepancyReport r = compare_cumulant(make_spec({0.0, 0.0}, 0.15));
  REQUIRE(r.moments.size() == 4);
  CHECK(r.moments[0].name == "pop_0");
  CHECK(r.moments[0].exact == doctest::Approx(25.0 / 43.0).epsilon(1e-10));
  CHECK(r.moments[0].cumulant == doctest::Approx(0.5842488631866634).epsilon(1e-8));
  CHECK(r.moments[1].name == "coh_0_1.re");
  CHECK(r.moments[1].cumulant == doctest::Approx(0.039377842033224524).epsilon(1e-8));
  CHECK(r.moments[1].rel_error == doctest::Approx(0.15337639628567173).epsilon(1e-6));
}

TEST_CASE("archived antinode discrepancies are reproduced") {
  std::ifstream in(std::string(CAVCOOL_SOURCE_DIR) + "/tests/fixtures/oracle_discrepancy.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  CHECK(line == "n_atoms,w_over_gamma_c,moment,exact,cumulant,rel_error");
  std::map<std::pair<int, double>, DiscrepancyReport> reports;
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string n, ratio, name, exact, cumulant, rel;
    std::getline(ss, n, ',');
    std::getline(ss, ratio, ',');
    std::getline(ss, name, ',');
    std::getline(ss, exact, ',');
    std::getline(ss, cumulant, ',');
    std::getline(ss, rel, ',');
    const std::pair<int, double> key{std::stoi(n), std::stod(ratio)};
    if (!reports.count(key)) {
      reports[key] = compare_cumulant(make_spec(std::vector<double>(key.first, 0.0), 0.1 * key.second));
    }
    const auto& moments = reports[key].moments;
    const auto it = std::find_if(moments.begin(), moments.end(), [&](const auto& m) { return m.name == name; });
    REQUIRE(it != moments.end());
    CHECK(it->exact == doctest::Approx(std::stod(exact)).epsilon(1e-8).scale(1e-12));
    CHECK(it->cumulant == doctest::Approx(std::stod(cumulant)).epsilon(1e-6).scale(1e-12));
    if (std::abs(std::stod(exact)) > 1e-6) CHECK(it->rel_error == doctest::Approx(std::stod(rel)).epsilon(1e-4));
    ++rows;
  }
  CHECK(rows == 48);
}

TEST_CASE("capacity") {
  CHECK_THROWS_AS(build_generator(make_spec({0.0, 0.0, 0.0, 0.0}, 0.1)), CapacityError);
}
