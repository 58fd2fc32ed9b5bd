#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "thzrsma/analog_mf.hpp"
#include "thzrsma/error.hpp"
#include "thzrsma/transceiver.hpp"

using namespace thzrsma;
using testsupport::random_cmatrix;

namespace {

// Plain double loops, no Eigen products.
double sinr_by_hand(const CVector& h, const CMatrix& f, int stream, bool common, double noise) {
  auto gain = [&](int col) {
    cdouble s{};
    for (int i = 0; i < h.size(); ++i) s += std::conj(h(i)) * f(i, col);
    return std::norm(s);
  };
  double interference = noise;
  for (int c = 1; c < f.cols(); ++c) {
    if (common || c != stream) interference += gain(c);
  }
  return gain(common ? 0 : stream) / interference;
}

}  // namespace

TEST_CASE("equivalent channel matches the explicit product") {
  std::mt19937_64 rng(1);
  const CMatrix f_rf = random_cmatrix(6, 2, rng);
  const CMatrix h_br = random_cmatrix(6, 5, rng);
  RisPhase phi{RVector::Random(5) * 3.0};
  const CVector h_ru = random_cmatrix(5, 1, rng).col(0);
  const CVector expected = f_rf.adjoint() * h_br * phi.matrix().adjoint() * h_ru;
  CHECK((equivalent_channel(f_rf, h_br, phi, h_ru) - expected).norm() < 1e-12);
  const auto stacked = equivalent_channels(f_rf, h_br, phi, {h_ru, 2.0 * h_ru});
  CHECK((stacked.col(1) - 2.0 * expected).norm() < 1e-12);
  CHECK_THROWS_AS(equivalent_channel(f_rf, h_br, phi, CVector::Zero(4)), DimensionError);
}

TEST_CASE("SINR definitions") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + trial % 4;
    const CMatrix h = random_cmatrix(k, k, rng);
    const CMatrix f = random_cmatrix(k, k + 1, rng);
    const double noise = 0.3;
    for (int u = 0; u < k; ++u) {
      CHECK(sinr_common(h.col(u), f, noise) ==
            doctest::Approx(sinr_by_hand(h.col(u), f, 0, true, noise)).epsilon(1e-12));
      CHECK(sinr_private(h.col(u), f, u + 1, noise) ==
            doctest::Approx(sinr_by_hand(h.col(u), f, u + 1, false, noise)).epsilon(1e-12));
    }
  }
}

TEST_CASE("all-zero precoder gives zero rates") {
  std::mt19937_64 rng(3);
  std::vector<CMatrix> h{random_cmatrix(3, 3, rng), random_cmatrix(3, 3, rng)};
  DigitalPrecoder f{{CMatrix::Zero(3, 4), CMatrix::Zero(3, 4)}};
  const RateReport r = rate_report(h, f, 1.0);
  CHECK(r.arwu == 0.0);
  CHECK(r.user_rate.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single UE: worst-user rate is private plus common") {
  std::mt19937_64 rng(4);
  std::vector<CMatrix> h{random_cmatrix(1, 1, rng)};
  DigitalPrecoder f{{random_cmatrix(1, 2, rng)}};
  const RateReport r = rate_report(h, f, 0.5);
  CHECK(r.worst_user_rate(0) == doctest::Approx(r.private_rate(0, 0) + r.common_rate(0, 0)));
  CHECK(r.user_rate(0, 0) == doctest::Approx(r.worst_user_rate(0)));
}

TEST_CASE("hand-built two-UE instance with unequal common rates") {
  // h_1 = e_1, h_2 = 2 e_2; f_c = (1, 1), f_1 = (1, 0), f_2 = (0, 1); noise 1.
  CMatrix h(2, 2);
  h << 1.0, 0.0, 0.0, 2.0;
  CMatrix f(2, 3);
  f << 1.0, 1.0, 0.0, 1.0, 0.0, 1.0;
  const RateReport r = rate_report({h}, DigitalPrecoder{{f}}, 1.0);
  // UE1: common |1|^2 / (|1|^2 + 0 + 1) = 1/2; private 1 / (0 + 1) = 1.
  // UE2: common 4 / (0 + 4 + 1) = 4/5; private 4 / (0 + 1) = 4.
  const double rc1 = std::log2(1.5);
  const double rc2 = std::log2(1.8);
  const double rp1 = 1.0;
  const double rp2 = std::log2(5.0);
  CHECK(r.common_rate(0, 0) == doctest::Approx(rc1));
  CHECK(r.common_rate(1, 0) == doctest::Approx(rc2));
  CHECK(r.private_rate(0, 0) == doctest::Approx(rp1));
  CHECK(r.private_rate(1, 0) == doctest::Approx(rp2));
  CHECK(r.common_rate_min(0) == doctest::Approx(rc1));
  CHECK(r.worst_user_rate(0) == doctest::Approx(rp1 + rc1));
  CHECK(r.user_rate(1, 0) == doctest::Approx(rp2 + rc1 / 2.0));
  CHECK(r.arwu == doctest::Approx(rp1 + rc1));
}

TEST_CASE("worst-user rate matches an independent recomputation") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 2 + trial % 3;
    std::vector<CMatrix> h;
    DigitalPrecoder f;
    for (int n = 0; n < 4; ++n) {
      h.push_back(random_cmatrix(k, k, rng));
      f.per_subcarrier.push_back(random_cmatrix(k, k + 1, rng));
    }
    const RateReport r = rate_report(h, f, 0.2);
    double total = 0.0;
    for (int n = 0; n < 4; ++n) {
      double min_p = 1e300;
      double min_c = 1e300;
      for (int u = 0; u < k; ++u) {
        const CVector hu = h[n].col(u);
        min_p = std::min(min_p, std::log2(1.0 + sinr_by_hand(hu, f.per_subcarrier[n], u + 1, false, 0.2)));
        min_c = std::min(min_c, std::log2(1.0 + sinr_by_hand(hu, f.per_subcarrier[n], 0, true, 0.2)));
      }
      CHECK(r.worst_user_rate(n) == doctest::Approx(min_p + min_c).epsilon(1e-12));
      total += min_p + min_c;
    }
    CHECK(r.arwu == doctest::Approx(total / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("permuting UEs permutes rates and keeps the worst-user rate") {
  std::mt19937_64 rng(6);
  const int k = 3;
  const CMatrix h = random_cmatrix(k, k, rng);
  const CMatrix f = random_cmatrix(k, k + 1, rng);
  const int perm[3] = {2, 0, 1};
  CMatrix hp(k, k);
  CMatrix fp(k, k + 1);
  fp.col(0) = f.col(0);
  for (int i = 0; i < k; ++i) {
    hp.col(i) = h.col(perm[i]);
    fp.col(i + 1) = f.col(perm[i] + 1);
  }
  const RateReport a = rate_report({h}, DigitalPrecoder{{f}}, 0.1);
  const RateReport b = rate_report({hp}, DigitalPrecoder{{fp}}, 0.1);
  for (int i = 0; i < k; ++i) CHECK(b.user_rate(i, 0) == doctest::Approx(a.user_rate(perm[i], 0)));
  CHECK(b.arwu == doctest::Approx(a.arwu));
}

TEST_CASE("SINR scaling behaviour") {
  std::mt19937_64 rng(7);
  const CMatrix h = random_cmatrix(2, 2, rng);
  // No interference: SINR grows with c.
  CMatrix f = CMatrix::Zero(2, 3);
  f.col(1) = random_cmatrix(2, 1, rng);
  double prev = 0.0;
  for (double c = 1.0; c < 1e4; c *= 3.0) {
    const double s = sinr_private(h.col(0), c * f, 1, 0.5);
    CHECK(s > prev);
    prev = s;
  }
  // With interference the SINR saturates at the signal-to-interference ratio.
  const CMatrix g = random_cmatrix(2, 3, rng);
  const CVector h0 = h.col(0);
  const double sir = std::norm(h0.dot(g.col(1))) / std::norm(h0.dot(g.col(2)));
  CHECK(std::abs(sinr_private(h0, 1e6 * g, 1, 0.5) - sir) <= 1e-6 * sir);
  const double sir_c = std::norm(h0.dot(g.col(0))) /
                       (std::norm(h0.dot(g.col(1))) + std::norm(h0.dot(g.col(2))));
  CHECK(std::abs(sinr_common(h0, 1e6 * g, 0.5) - sir_c) <= 1e-6 * sir_c);
}

TEST_CASE("constraint validation") {
  const SystemConfig c = desk_preset();
  const ArrayPair a = build_geometry(c);
  const auto h_br = gen_bs_ris_channel(c, a.bs, a.ris);
  const CMatrix f_rf = mf_analog_precoder(subarray_phases(h_br, c), c);
  RisPhase phi{RVector::LinSpaced(c.num_elements(), 0.0, 6.0)};
  std::mt19937_64 rng(8);
  const double p = 2.0;
  DigitalPrecoder f{{testsupport::random_precoder(2, rng, p)}};

  ConstraintReport ok = validate_constraints(phi.matrix(), f_rf, f, p);
  CHECK(ok.ok());
  CHECK(ok.analog_ok);

  DigitalPrecoder loud{{f.per_subcarrier[0] * 2.0}};
  const ConstraintReport over = validate_constraints(phi.matrix(), f_rf, loud, p);
  CHECK_FALSE(over.power_ok);
  CHECK(over.power_violation == doctest::Approx(3.0 * p));

  CMatrix bad_phi = phi.matrix();
  bad_phi(0, 3) = 0.5;
  const ConstraintReport ris = validate_constraints(bad_phi, f_rf, f, p);
  CHECK_FALSE(ris.ris_ok);
  CHECK(ris.power_ok);
  CHECK(ris.describe().find("RIS FAIL") != std::string::npos);

  CMatrix bad_rf = f_rf;
  bad_rf(0, 0) *= 1.1;
  CHECK_FALSE(validate_constraints(phi.matrix(), bad_rf, f, p).analog_ok);
}
