#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "cavcool/trajectory.hpp"
#include "support.hpp"

using namespace cavcool;

TEST_CASE("automatic step size") {
  const PhysParams p = cavtest::base_params(60, 1.3);
  const DerivedRates r = derive_rates(p);
  CHECK(max_atomic_rate(p, r) == doctest::Approx(6.0));
  CHECK(auto_dt(p, r) == doctest::Approx(0.1 / 6.0));
  StepConfig cfg;
  cfg.dt = 0.2 / 6.0;
  CHECK_THROWS_AS(validate_step_config(cfg, p, r), ConfigError);
  cfg.dt = auto_dt(p, r);
  CHECK_NOTHROW(validate_step_config(cfg, p, r));
  cfg.spin_substeps = 0;
  CHECK_THROWS_AS(validate_step_config(cfg, p, r), ConfigError);
}

TEST_CASE("initial state") {
  const PhysParams p = cavtest::base_params(10);
  SUBCASE("zero momentum width") {
    InitConfig init;
    init.dp0 = 0.0;
    const TrajectoryState s = init_trajectory(p, init, 1, 0);
    for (double v : s.p) CHECK(v == 0.0);
  }
  SUBCASE("populations start at the local single-atom steady state") {
    const TrajectoryState s = init_trajectory(p, InitConfig{}, 1, 0);
    const double gc = derive_rates(p).gamma_c;
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      CHECK(s.x[j] >= 0.0);
      CHECK(s.x[j] < 2.0 * std::numbers::pi);
      const double c = std::cos(s.x[j]);
      CHECK(s.spins.pop()[j] == doctest::Approx(p.w / (p.w + gc * c * c)));
    }
    for (const auto& c : s.spins.coh()) CHECK(c == cplx(0.0, 0.0));
  }
  SUBCASE("fixed seed and index give identical states") {
    const TrajectoryState a = init_trajectory(p, InitConfig{}, 77, 5);
    const TrajectoryState b = init_trajectory(p, InitConfig{}, 77, 5);
    const TrajectoryState c = init_trajectory(p, InitConfig{}, 77, 6);
    CHECK(a.x == b.x);
    CHECK(a.p == b.p);
    CHECK(a.x != c.x);
  }
  SUBCASE("momentum variance") {
    const PhysParams one = cavtest::base_params(1);
    const int n = 10000;
    double s2 = 0.0, s4 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = init_trajectory(one, InitConfig{}, 3, i).p[0];
      s2 += v * v;
      s4 += v * v * v * v;
    }
    const double var = s2 / n;
    const double se = std::sqrt((s4 / n - var * var) / n);
    CHECK(std::abs(var - 225.0) <= 3.0 * se);
  }
}

TEST_CASE("empty system is a fixed point") {
  PhysParams p = cavtest::base_params(3, 0.0);
  StepConfig cfg;
  cfg.dt = 0.01;
  TrajectoryState s = init_trajectory(p, InitConfig{}, 1, 0);
  s.spins.set_zero();
  const auto x0 = s.x, p0 = s.p;
  const double m = derive_rates(p).mass;
  TrajectoryStepper stepper(p, cfg);
  for (int i = 0; i < 50; ++i) stepper.step(s);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(s.p[j] == p0[j]);
    CHECK(s.x[j] == doctest::Approx(x0[j] + p0[j] / m * 0.5).epsilon(1e-12));
    CHECK(s.spins.pop()[j] == 0.0);
  }
}

TEST_CASE("single atom at a node") {
  // cos(kx) = 0: no emission, so the atom stays inverted; sin(kx)^2 = 1, so
  // friction -eta Gamma_C pop p acts while the conservative force vanishes.
  PhysParams p = cavtest::base_params(1);
  const DerivedRates r = derive_rates(p);
  StepConfig cfg;
  cfg.dt = 0.05;
  cfg.noise = false;
  TrajectoryState s = init_trajectory(p, InitConfig{}, 1, 0);
  s.x = {std::numbers::pi / 2.0};
  s.p = {4.0};
  s.spins.pop()[0] = 1.0;
  TrajectoryStepper stepper(p, cfg);
  stepper.step(s);
  CHECK(s.spins.pop()[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.p[0] == doctest::Approx(4.0 * (1.0 - r.eta * r.gamma_c * cfg.dt)).epsilon(1e-13));
  CHECK(s.x[0] == doctest::Approx(std::numbers::pi / 2.0 + s.p[0] / r.mass * cfg.dt).epsilon(1e-13));
}

TEST_CASE("deterministic dynamics converge at first order in dt") {
  const PhysParams p = cavtest::base_params(3, 0.28);
  // Slow atoms, so that kv dt stays small and the asymptotic regime is reached.
  InitConfig init;
  init.dp0 = 2.0;
  const TrajectoryState s0 = init_trajectory(p, init, 4, 0);
  auto observable = [&](double dt) {
    StepConfig cfg;
    cfg.dt = dt;
    cfg.noise = false;
    TrajectoryState s = s0;
    TrajectoryStepper stepper(p, cfg);
    const long long n = step_count(10.0, dt);
    for (long long i = 0; i < n; ++i) stepper.step(s);
    return s.p[0];
  };
  const double dt = 0.1 / 0.3;
  const double a = observable(dt), b = observable(dt / 2), c = observable(dt / 4);
  const double ratio = (a - b) / (b - c);
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("translation by one wavelength leaves the momenta unchanged") {
  const PhysParams p = cavtest::base_params(4, 0.28);
  StepConfig cfg;
  cfg.dt = auto_dt(p, derive_rates(p));
  TrajectoryState a = init_trajectory(p, InitConfig{}, 8, 2);
  TrajectoryState b = a;
  for (auto& x : b.x) x += 2.0 * std::numbers::pi;
  TrajectoryStepper sa(p, cfg), sb(p, cfg);
  for (int i = 0; i < 500; ++i) {
    sa.step(a);
    sb.step(b);
  }
  for (std::size_t j = 0; j < 4; ++j) CHECK(b.p[j] == doctest::Approx(a.p[j]).epsilon(1e-9));
}

TEST_CASE("parity: mirrored positions and momenta give mirrored momenta") {
  const PhysParams p = cavtest::base_params(4, 0.28);
  StepConfig cfg;
  cfg.dt = auto_dt(p, derive_rates(p));
  cfg.noise = false;
  TrajectoryState a = init_trajectory(p, InitConfig{}, 8, 2);
  TrajectoryState b = a;
  for (auto& x : b.x) x = -x;
  for (auto& v : b.p) v = -v;
  TrajectoryStepper sa(p, cfg), sb(p, cfg);
  for (int i = 0; i < 500; ++i) {
    sa.step(a);
    sb.step(b);
  }
  for (std::size_t j = 0; j < 4; ++j) CHECK(b.p[j] == doctest::Approx(-a.p[j]).epsilon(1e-12));
}

TEST_CASE("recording") {
  const PhysParams p = cavtest::base_params(2);
  StepConfig cfg;
  cfg.dt = auto_dt(p, derive_rates(p));
  const TrajectoryState s = init_trajectory(p, InitConfig{}, 1, 0);
  SUBCASE("t_final = 0 records only the initial state") {
    const TrajectorySeries ser = run_trajectory(s, p, cfg, 0.0, RecordConfig{});
    REQUIRE(ser.t.size() == 1);
    CHECK(ser.t[0] == 0.0);
    CHECK(ser.final_p == s.p);
  }
  SUBCASE("a stride beyond the run gives initial and final records") {
    RecordConfig rec;
    rec.sample_stride = 1000000;
    const TrajectorySeries ser = run_trajectory(s, p, cfg, 50.0, rec);
    REQUIRE(ser.t.size() == 2);
    CHECK(ser.t[1] == doctest::Approx(step_count(50.0, cfg.dt) * cfg.dt));
  }
  SUBCASE("snapshots") {
    RecordConfig rec;
    rec.late_snapshots = 5;
    const TrajectorySeries ser = run_trajectory(s, p, cfg, 100.0, rec);
    REQUIRE(ser.snapshots.size() == 5);
    CHECK(ser.snapshots.back() == ser.final_p);
  }
  SUBCASE("same seed gives bit-identical series") {
    const TrajectorySeries a = run_trajectory(s, p, cfg, 100.0, RecordConfig{});
    const TrajectorySeries b = run_trajectory(init_trajectory(p, InitConfig{}, 1, 0), p, cfg, 100.0, RecordConfig{});
    CHECK(a.p2 == b.p2);
    CHECK(a.inversion == b.inversion);
    CHECK(a.final_x == b.final_x);
  }
}

TEST_CASE("non-finite state raises a trajectory failure") {
  const PhysParams p = cavtest::base_params(2);
  StepConfig cfg;
  cfg.dt = auto_dt(p, derive_rates(p));
  TrajectoryState s = init_trajectory(p, InitConfig{}, 1, 0);
  s.p[1] = std::nan("");
  CHECK_THROWS_AS(run_trajectory(s, p, cfg, 10.0, RecordConfig{}), TrajectoryFailure);
}
