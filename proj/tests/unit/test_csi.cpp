#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "thzrsma/csi_acquisition.hpp"
#include "thzrsma/error.hpp"

using namespace thzrsma;
using testsupport::random_cmatrix;

namespace {

struct Link {
  SystemConfig config;
  BsRisChannel h_br;
  CMatrix f_rf;
  std::vector<RisUeChannel> h_ru;
};

Link desk_link(double tx_dbm, std::uint64_t seed = 1) {
  Link l;
  l.config = desk_preset();
  l.config.tx_power_dbm = tx_dbm;
  const ArrayPair a = build_geometry(l.config);
  l.h_br = gen_bs_ris_channel(l.config, a.bs, a.ris);
  l.f_rf = mf_analog_precoder(subarray_phases(l.h_br, l.config), l.config);
  l.h_ru = gen_ris_ue_channel_los(l.config, a.ris, sample_ue_positions(l.config, seed));
  return l;
}

}  // namespace

TEST_CASE("single-symbol measurement row") {
  const Link l = desk_link(30.0);
  const double p = l.config.tx_power_w();
  PilotBundle pb;
  pb.ris_phases = RMatrix::Zero(1, 32);
  pb.rf_phases.push_back(l.f_rf.unaryExpr([](cdouble v) { return std::arg(v); }));
  CMatrix x = CMatrix::Zero(l.config.num_subcarriers, 2);
  x.col(0).setConstant(std::sqrt(p));
  pb.x_bb.push_back(x);
  const auto meas = build_measurement(pb, l.h_br, l.config);
  REQUIRE(meas.size() == 8);
  for (int n = 0; n < 8; ++n) {
    const CVector expected = std::sqrt(p) * (l.h_br[n].adjoint() * l.f_rf.col(0)).conjugate();
    CHECK((meas[n].row(0).transpose() - expected).norm() <= 1e-12 * expected.norm());
  }
}

TEST_CASE("zero baseband pilot gives a zero row and oversized pilots are rejected") {
  const Link l = desk_link(30.0);
  PilotBundle pb = default_pilots(l.config, l.f_rf, 3, PilotDesign::kRandom, 4);
  pb.x_bb[1].setZero();
  const auto meas = build_measurement(pb, l.h_br, l.config);
  for (const auto& m : meas) {
    CHECK(m.row(1).norm() == 0.0);
    CHECK(m.row(0).norm() > 0.0);
  }
  pb.x_bb[2] *= 1.01;
  CHECK_THROWS_AS(build_measurement(pb, l.h_br, l.config), ConfigError);
  PilotBundle short_rf = default_pilots(l.config, l.f_rf, 2, PilotDesign::kDft, 0);
  short_rf.rf_phases.pop_back();
  CHECK_THROWS_AS(validate_pilots(short_rf, l.config), DimensionError);
}

TEST_CASE("default pilot designs") {
  const Link l = desk_link(40.0);
  const double p = l.config.tx_power_w();
  const PilotBundle r = default_pilots(l.config, l.f_rf, 5, PilotDesign::kRandom, 9);
  CHECK(r.num_symbols() == 5);
  CHECK(r.x_bb[3].col(1).cwiseAbs().minCoeff() == doctest::Approx(std::sqrt(p)));
  CHECK(r.x_bb[3].col(0).norm() == 0.0);
  CHECK_NOTHROW(validate_pilots(r, l.config));
  const PilotBundle r2 = default_pilots(l.config, l.f_rf, 5, PilotDesign::kRandom, 9);
  CHECK(r.ris_phases == r2.ris_phases);

  const PilotBundle d = default_pilots(l.config, l.f_rf, 32, PilotDesign::kDft, 0);
  CHECK(d.ris_phases(3, 5) == doctest::Approx(2.0 * M_PI * 15.0 / 32.0));
  CHECK(d.x_bb[0].row(0).squaredNorm() == doctest::Approx(p));
  // MF analog pilots.
  const CMatrix x_rf = d.rf_phases[0].unaryExpr([](double a) { return std::polar(1.0 / std::sqrt(32.0), a); });
  CHECK((x_rf - l.f_rf).norm() < 1e-14);
}

TEST_CASE("noiseless reception is exactly X h and linear in h") {
  const Link l = desk_link(30.0);
  const PilotBundle pb = default_pilots(l.config, l.f_rf, 7, PilotDesign::kRandom, 2);
  const auto meas = build_measurement(pb, l.h_br, l.config);
  const ReceivedPilots y = simulate_pilot_rx(meas, l.h_ru[0], 0.0, 3);
  for (int n = 0; n < 8; ++n) {
    CHECK((y.y.row(n).transpose() - meas[n] * l.h_ru[0].at(n)).norm() == 0.0);
  }
  RisUeChannel scaled = l.h_ru[0];
  const cdouble alpha(2.0, -1.0);
  scaled.h *= alpha;
  const ReceivedPilots ys = simulate_pilot_rx(meas, scaled, 0.0, 3);
  CHECK((ys.y - alpha * y.y).norm() <= 1e-12 * ys.y.norm());
}

TEST_CASE("pilot noise statistics and seeding") {
  std::vector<CMatrix> meas{CMatrix::Zero(100000, 1)};
  RisUeChannel h{CMatrix::Ones(1, 1), {}, {}};
  const double noise = 2.5e-3;
  const ReceivedPilots y = simulate_pilot_rx(meas, h, noise, 11);
  const double var = y.y.cwiseAbs2().mean();
  CHECK(var == doctest::Approx(noise).epsilon(0.02));
  const ReceivedPilots again = simulate_pilot_rx(meas, h, noise, 11);
  CHECK(y.y == again.y);
  CHECK_THROWS_AS(simulate_pilot_rx(meas, h, -1.0, 1), ConfigError);
}

TEST_CASE("LS recovers the channel exactly without noise") {
  const Link l = desk_link(40.0);
  const PilotBundle pb = default_pilots(l.config, l.f_rf, 32, PilotDesign::kDft, 0);
  const auto meas = build_measurement(pb, l.h_br, l.config);
  std::vector<RisUeChannel> est;
  for (const auto& h : l.h_ru) est.push_back(ls_estimate(simulate_pilot_rx(meas, h, 0.0, 1), meas));
  CHECK(nmse(est, l.h_ru) < 1e-20);
  const auto pinv = measurement_pinv(meas);
  const RisUeChannel shared = ls_apply(simulate_pilot_rx(meas, l.h_ru[1], 0.0, 1), pinv);
  CHECK((shared.h - est[1].h).norm() == 0.0);
}

TEST_CASE("single pilot gives the minimum-norm solution") {
  std::mt19937_64 rng(5);
  const CMatrix x = random_cmatrix(1, 16, rng);
  const CMatrix h = random_cmatrix(1, 16, rng);
  RisUeChannel ch{h, {}, {}};
  const ReceivedPilots y = simulate_pilot_rx({x}, ch, 0.0, 1);
  const RisUeChannel est = ls_estimate(y, {x});
  const CVector e = est.at(0);
  // Consistent with the measurement...
  CHECK(std::abs((x * e)(0) - y.y(0, 0)) < 1e-12);
  // ...and shorter than any other solution e + null-space component.
  for (int trial = 0; trial < 20; ++trial) {
    CVector v = random_cmatrix(16, 1, rng).col(0);
    v -= x.adjoint() * ((x * v)(0) / x.squaredNorm());
    CHECK((e + v).norm() > e.norm());
  }
  CHECK((e - x.adjoint() * (y.y(0, 0) / x.squaredNorm())).norm() < 1e-12);
}

TEST_CASE("pseudo-inverse truncates tiny singular values") {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 1e-12;
  const CMatrix p = pseudo_inverse(m);
  CHECK(std::abs(p(0, 0) - 1.0) < 1e-15);
  CHECK(p(1, 1) == 0.0);
}

TEST_CASE("LS error shrinks with pilot power and with more nested pilots") {
  auto mean_nmse = [](double dbm, int q, int trials) {
    const Link l = desk_link(dbm);
    const PilotBundle pb = default_pilots(l.config, l.f_rf, q, PilotDesign::kDft, 0);
    const auto pinv = measurement_pinv(build_measurement(pb, l.h_br, l.config));
    const auto meas = build_measurement(pb, l.h_br, l.config);
    double sum = 0.0;
    for (int t = 0; t < trials; ++t) {
      std::vector<RisUeChannel> est;
      for (std::size_t k = 0; k < l.h_ru.size(); ++k) {
        est.push_back(ls_apply(
            simulate_pilot_rx(meas, l.h_ru[k], l.config.noise_power_w(), 100 * t + k), pinv));
      }
      sum += nmse(est, l.h_ru);
    }
    return sum / trials;
  };
  double prev = 1e300;
  for (double dbm : {50.0, 60.0, 70.0, 80.0}) {
    const double v = mean_nmse(dbm, 32, 100);
    CHECK(v <= prev);
    prev = v;
  }
  prev = 1e300;
  for (int q : {4, 8, 16, 24, 32}) {
    const double v = mean_nmse(90.0, q, 20);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("Gaussian CSI error injection") {
  std::mt19937_64 rng(7);
  const CMatrix h = random_cmatrix(400, 250, rng);
  CHECK(inject_gaussian_csi_error(h, 0.0, 1) == h);
  const double s2 = 0.3;
  const CMatrix noisy = inject_gaussian_csi_error(h, s2, 1);
  const CMatrix err = noisy - h;
  CHECK(err.cwiseAbs2().mean() == doctest::Approx(s2).epsilon(0.02));
  // Sample correlation between error and channel, real and imaginary parts.
  const Eigen::ArrayXd a = Eigen::Map<const Eigen::ArrayXd>(
      reinterpret_cast<const double*>(err.data()), 2 * err.size());
  const Eigen::ArrayXd b = Eigen::Map<const Eigen::ArrayXd>(
      reinterpret_cast<const double*>(h.data()), 2 * h.size());
  const double corr = ((a - a.mean()) * (b - b.mean())).sum() /
                      std::sqrt((a - a.mean()).square().sum() * (b - b.mean()).square().sum());
  CHECK(std::abs(corr) < 0.01);
  CHECK(inject_gaussian_csi_error(h, s2, 1) == noisy);
  CHECK_THROWS_AS(inject_gaussian_csi_error(h, -1.0, 1), ConfigError);
}

TEST_CASE("NMSE metric") {
  std::mt19937_64 rng(8);
  std::vector<CMatrix> h{random_cmatrix(4, 6, rng), random_cmatrix(4, 6, rng)};
  CHECK(nmse(h, h) == 0.0);
  std::vector<CMatrix> zero{CMatrix::Zero(4, 6), CMatrix::Zero(4, 6)};
  CHECK(nmse(zero, h) == doctest::Approx(1.0));
  std::vector<CMatrix> twice{2.0 * h[0], 2.0 * h[1]};
  CHECK(nmse(twice, h) == doctest::Approx(1.0));

  std::vector<CMatrix> est{h[0] + random_cmatrix(4, 6, rng, 0.1), h[1] + random_cmatrix(4, 6, rng, 0.1)};
  const CMatrix u = Eigen::HouseholderQR<CMatrix>(random_cmatrix(6, 6, rng)).householderQ();
  std::vector<CMatrix> est_u{est[0] * u, est[1] * u};
  std::vector<CMatrix> h_u{h[0] * u, h[1] * u};
  CHECK(nmse(est_u, h_u) == doctest::Approx(nmse(est, h)).epsilon(1e-12));

  CHECK_THROWS_AS(nmse(zero, zero), NumericalError);
  CHECK_THROWS_AS(nmse(std::vector<CMatrix>{}, std::vector<CMatrix>{}), DimensionError);
}

TEST_CASE("LS error matches sigma^2 tr((X^H X)^-1)") {
  const Link l = desk_link(70.0, 3);
  const PilotBundle pb = default_pilots(l.config, l.f_rf, 32, PilotDesign::kDft, 0);
  const auto meas = build_measurement(pb, l.h_br, l.config);
  const auto pinv = measurement_pinv(meas);
  const double noise = l.config.noise_power_w();
  double expected = 0.0;
  for (const CMatrix& x : meas) {
    const CMatrix gram = x.adjoint() * x;
    expected += noise * gram.inverse().trace().real();
  }
  double err = 0.0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    const RisUeChannel est = ls_apply(simulate_pilot_rx(meas, l.h_ru[0], noise, 5000 + t), pinv);
    err += (est.h - l.h_ru[0].h).squaredNorm();
  }
  CHECK(err / trials == doctest::Approx(expected).epsilon(0.03));
}
