#include "hgamma/invrep.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "hgamma/groups.hpp"
#include "hgamma/rng.hpp"
#include "oracles.hpp"

using namespace hgamma;

namespace {

Vec random_unit_box(int n, Rng& rng) {
  Vec x(n);
  for (double& v : x) v = rng.uniform();
  return x;
}

double vec_dist(const Vec& a, const Vec& b) { return norm2(a - b); }

}  // namespace

TEST(So3Features, DirectArithmetic) {
  const So3Features f = so3_features({3.0, 4.0, 5.0}, Mat::identity(3));
  EXPECT_DOUBLE_EQ(f.radial, 25.0);
  EXPECT_DOUBLE_EQ(f.axial, 5.0);
}

TEST(So3Features, AxisPoint) {
  const So3Features f = so3_features({0.0, 0.0, -2.5}, Mat::identity(3));
  EXPECT_DOUBLE_EQ(f.radial, 0.0);
  EXPECT_DOUBLE_EQ(f.axial, -2.5);
}

TEST(So3Features, InvariantAlongSubgroupOrbits) {
  Rng rng(31);
  const Mat a = random_so_n(3, rng);
  const SubgroupSpec spec{3, a, {1.0}, Family::Elliptic};
  for (int trial = 0; trial < 100; ++trial) {
    const Vec x = random_unit_box(3, rng);
    const Vec hx = matvec(element_at(spec, rng.uniform(0.0, 6.283185307)).matrix, x);
    const So3Features f0 = so3_features(x, a);
    const So3Features f1 = so3_features(hx, a);
    EXPECT_NEAR(f0.radial, f1.radial, 1e-10);
    EXPECT_NEAR(f0.axial, f1.axial, 1e-10);
  }
}

TEST(So3Features, RejectsNonOrthogonal) {
  EXPECT_THROW(so3_features({1.0, 0.0, 0.0}, 2.0 * Mat::identity(3)), std::invalid_argument);
}

TEST(InvRep, AlreadyCanonical) {
  const SubgroupSpec spec = SubgroupSpec::canonical(4, {1.0, 1.0});
  const InvRepOutput out = inv_rep({1.0, 0.0, 0.0, 1.0}, spec);
  EXPECT_EQ(out.status, InvRepStatus::Ok);
  EXPECT_EQ(out.pivot_block, 1);
  EXPECT_NEAR(out.t0, 0.0, 1e-15);
  EXPECT_LT(vec_dist(out.rep, {1.0, 0.0, 0.0, 1.0}), 1e-14);
}

TEST(InvRep, QuarterTurnPivot) {
  const SubgroupSpec spec = SubgroupSpec::canonical(4, {1.0, 1.0});
  const InvRepOutput out = inv_rep({0.0, 1.0, 0.0, 1.0}, spec);
  EXPECT_NEAR(out.t0, M_PI_2, 1e-14);
  EXPECT_LT(vec_dist(out.rep, {1.0, 0.0, 1.0, 0.0}), 1e-14);
}

TEST(InvRep, OddTrailingCoordinatePassesThrough) {
  const SubgroupSpec spec = SubgroupSpec::canonical(3, {1.0});
  const InvRepOutput out = inv_rep({0.0, 1.0, 7.0}, spec);
  EXPECT_LT(vec_dist(out.rep, {1.0, 0.0, 7.0}), 1e-14);
}

TEST(InvRep, PivotSkipsZeroRateAndTinyBlocks) {
  const SubgroupSpec spec = SubgroupSpec::canonical(6, {0.0, 1.0, 1.0});
  // Block 1 has rate zero, block 2 is numerically empty: block 3 must align.
  const InvRepOutput out = inv_rep({0.4, 0.5, 1e-12, 0.0, 0.0, 2.0}, spec);
  EXPECT_EQ(out.pivot_block, 3);
  EXPECT_NEAR(out.rep[4], 2.0, 1e-12);
  EXPECT_NEAR(out.rep[5], 0.0, 1e-12);
  // Zero-rate block is copied verbatim.
  EXPECT_DOUBLE_EQ(out.rep[0], 0.4);
  EXPECT_DOUBLE_EQ(out.rep[1], 0.5);
}

TEST(InvRep, DegenerateOrbitSignal) {
  const SubgroupSpec spec = SubgroupSpec::canonical(4, {1.0, 1.0});
  const InvRepOutput out = inv_rep({1e-12, 0.0, 0.0, 1e-12}, spec);
  EXPECT_EQ(out.status, InvRepStatus::DegenerateOrbit);
  EXPECT_EQ(out.pivot_block, 0);
  EXPECT_DOUBLE_EQ(out.t0, 0.0);
}

TEST(InvRep, InvarianceUnderSampledGroupElements) {
  // Commensurate rates: the principal t0 branch is then immaterial and the
  // representation is exactly invariant along the whole orbit.
  Rng rng(32);
  for (const int n : {3, 4, 6}) {
    Vec lambda(n / 2);
    for (double& l : lambda) l = static_cast<double>(rng.uniform_int(1, 3));
    lambda[0] = 1.0;
    const SubgroupSpec spec{n, random_so_n(n, rng), lambda, Family::Elliptic};
    for (int trial = 0; trial < 50; ++trial) {
      const Vec x = random_unit_box(n, rng);
      const Vec hx = matvec(sample_element(spec, rng).matrix, x);
      const InvRepOutput a = inv_rep(x, spec);
      const InvRepOutput b = inv_rep(hx, spec);
      ASSERT_EQ(a.status, InvRepStatus::Ok);
      EXPECT_LT(vec_dist(a.rep, b.rep), 1e-8);
    }
  }
}

TEST(InvRep, IncommensurateRatesLeakOnlyAtBranchWraps) {
  // Characterization: with a non-integer rate ratio the t0 branch cut makes
  // the non-pivot block pick up R(2 pi k lambda_i / lambda_1) across wraps.
  // Invariance still holds exactly whenever the pivot angle does not wrap.
  Rng rng(40);
  const SubgroupSpec spec = SubgroupSpec::canonical(4, {1.0, 0.77});
  int wraps = 0, clean = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec x = random_unit_box(4, rng);
    const double t = rng.uniform(0.0, 6.283185307);
    const Vec hx = matvec(element_at(spec, t).matrix, x);
    const InvRepOutput a = inv_rep(x, spec);
    const InvRepOutput b = inv_rep(hx, spec);
    const bool wrapped = std::abs((a.t0 + t) - b.t0) > 1e-6;
    const double d = vec_dist(a.rep, b.rep);
    if (wrapped) {
      ++wraps;
    } else {
      ++clean;
      EXPECT_LT(d, 1e-10);
    }
  }
  EXPECT_GT(wraps, 10);
  EXPECT_GT(clean, 10);
}

TEST(InvRep, PivotCanonicalFormInvariant) {
  Rng rng(33);
  const SubgroupSpec spec{4, random_so_n(4, rng), {1.0, 0.7}, Family::Elliptic};
  for (int trial = 0; trial < 50; ++trial) {
    const InvRepOutput out = inv_rep(random_unit_box(4, rng), spec);
    ASSERT_EQ(out.status, InvRepStatus::Ok);
    ASSERT_GE(out.pivot_block, 1);
    EXPECT_NEAR(out.rep[2 * (out.pivot_block - 1) + 1], 0.0, 1e-10);
    EXPECT_GE(out.rep[2 * (out.pivot_block - 1)], 0.0);
  }
}

TEST(InvRepH, BoostPivotUnwinds) {
  const SubgroupSpec spec = SubgroupSpec::canonical(2, {1.0}, Family::Hyperbolic);
  const double s = 0.9;
  const InvRepOutput out = inv_rep_h({std::cosh(s), std::sinh(s)}, spec);
  EXPECT_NEAR(out.t0, s, 1e-12);
  EXPECT_NEAR(out.rep[0], 1.0, 1e-12);
  EXPECT_NEAR(out.rep[1], 0.0, 1e-12);
}

TEST(InvRepH, PseudoNormPivot) {
  const SubgroupSpec spec = SubgroupSpec::canonical(4, {1.0, 1.0}, Family::Hyperbolic);
  const InvRepOutput out = inv_rep_h({std::sqrt(2.0), 1.0, 0.0, 0.0}, spec);
  EXPECT_NEAR(out.rep[0], 1.0, 1e-12);
  EXPECT_NEAR(out.rep[1], 0.0, 1e-12);
  EXPECT_NEAR(out.rep[2], 0.0, 1e-12);
  EXPECT_NEAR(out.rep[3], 0.0, 1e-12);
}

TEST(InvRepH, LightconeSignal) {
  const SubgroupSpec spec = SubgroupSpec::canonical(4, {1.0, 1.0}, Family::Hyperbolic);
  EXPECT_EQ(inv_rep_h({0.5, 0.9, 0.0, 0.0}, spec).status, InvRepStatus::LightconeRegion);
  EXPECT_EQ(inv_rep_h({0.0, 0.0, 1.0, 1.0}, spec).status, InvRepStatus::DegenerateOrbit);
}

TEST(InvRepH, InvarianceOnTimelikeRegion) {
  Rng rng(34);
  const SubgroupSpec spec{4, random_so_n(4, rng), {1.0, 0.6}, Family::Hyperbolic};
  for (int trial = 0; trial < 100; ++trial) {
    Vec v(4);
    v[0] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(1.0, 2.0);
    v[1] = rng.uniform(-0.5, 0.5);
    v[2] = rng.uniform(-1.0, 1.0);
    v[3] = rng.uniform(-1.0, 1.0);
    const Vec x = matvec(spec.A, v);
    const double t = rng.uniform(-2.0, 2.0);
    const Vec hx = matvec(element_at(spec, t).matrix, x);
    const InvRepOutput a = inv_rep_h(x, spec);
    const InvRepOutput b = inv_rep_h(hx, spec);
    ASSERT_EQ(a.status, InvRepStatus::Ok);
    ASSERT_EQ(b.status, InvRepStatus::Ok);
    EXPECT_LT(vec_dist(a.rep, b.rep), 1e-8);
  }
}

TEST(InvRepP, PivotForcedToSecondAxis) {
  const SubgroupSpec spec = SubgroupSpec::canonical(2, {1.0}, Family::Parabolic);
  const InvRepOutput out = inv_rep_p({3.7, 1.4}, spec);
  EXPECT_NEAR(out.rep[0], 0.0, 1e-14);
  EXPECT_NEAR(out.rep[1], 1.4, 1e-14);
}

TEST(InvRepP, HandComputedExample) {
  const SubgroupSpec spec = SubgroupSpec::canonical(4, {1.0, 1.0}, Family::Parabolic);
  const InvRepOutput out = inv_rep_p({6.0, 2.0, 1.0, 3.0}, spec);
  EXPECT_NEAR(out.t0, 3.0, 1e-14);
  EXPECT_LT(vec_dist(out.rep, {0.0, 2.0, -8.0, 3.0}), 1e-13);
}

TEST(InvRepP, DegenerateWhenPivotFixed) {
  const SubgroupSpec spec = SubgroupSpec::canonical(4, {1.0, 1.0}, Family::Parabolic);
  EXPECT_EQ(inv_rep_p({1.0, 0.0, 0.5, 0.5}, spec).status, InvRepStatus::DegenerateOrbit);
}

TEST(InvRepP, InvarianceUnderShears) {
  Rng rng(35);
  const SubgroupSpec spec{4, random_so_n(4, rng), {1.0, 1.4}, Family::Parabolic};
  for (int trial = 0; trial < 100; ++trial) {
    Vec v(4);
    v[0] = rng.uniform(-1.0, 1.0);
    v[1] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
    v[2] = rng.uniform(-1.0, 1.0);
    v[3] = rng.uniform(-1.0, 1.0);
    const Vec x = matvec(spec.A, v);
    const double t = rng.uniform(-3.0, 3.0);
    const Vec hx = matvec(element_at(spec, t).matrix, x);
    const InvRepOutput a = inv_rep_p(x, spec);
    const InvRepOutput b = inv_rep_p(hx, spec);
    ASSERT_EQ(a.status, InvRepStatus::Ok);
    EXPECT_LT(vec_dist(a.rep, b.rep), 1e-9);
  }
}

TEST(OrbitOracle, OnOrbitByConstruction) {
  Rng rng(36);
  const SubgroupSpec spec{4, random_so_n(4, rng), {1.0, 2.0}, Family::Elliptic};
  const Vec x = random_unit_box(4, rng);
  const Vec y = matvec(element_at(spec, 1.3).matrix, x);
  EXPECT_TRUE(orbit_equal_oracle(x, y, spec, 200));
}

TEST(OrbitOracle, NormMismatchIsOffOrbit) {
  Rng rng(37);
  const SubgroupSpec spec{4, random_so_n(4, rng), {1.0, 2.0}, Family::Elliptic};
  const Vec x = random_unit_box(4, rng);
  Vec y = x;
  y[0] += 10.0;
  EXPECT_FALSE(orbit_equal_oracle(x, y, spec, 200));
}

TEST(OrbitOracle, GridPreconditionEnforced) {
  const SubgroupSpec spec = SubgroupSpec::canonical(4, {1.0, 1.0});
  EXPECT_THROW(orbit_equal_oracle({1, 0, 0, 0}, {1, 0, 0, 0}, spec, 50), std::invalid_argument);
}

TEST(OrbitRepresentation, MappedRepLiesOnOrbit) {
  Rng rng(38);
  for (const Family family : {Family::Elliptic, Family::Hyperbolic, Family::Parabolic}) {
    const SubgroupSpec spec{4, random_so_n(4, rng), {1.0, 2.0}, family};
    for (int trial = 0; trial < 10; ++trial) {
      Vec v(4);
      v[0] = rng.uniform(1.0, 2.0);  // timelike / non-degenerate pivot for all families
      v[1] = rng.uniform(-0.4, 0.4);
      v[2] = rng.uniform(-1.0, 1.0);
      v[3] = rng.uniform(-1.0, 1.0);
      if (family == Family::Parabolic) std::swap(v[0], v[1]);
      const Vec x = matvec(spec.A, v);
      const InvRepOutput out = inv_rep_family(x, spec);
      ASSERT_EQ(out.status, InvRepStatus::Ok);
      EXPECT_TRUE(orbit_equal_oracle(x, matvec(spec.A, out.rep), spec, 400));
    }
  }
}

TEST(OrbitSeparation, AgreementWithOracleOnRandomPairs) {
  Rng rng(39);
  const SubgroupSpec spec{4, random_so_n(4, rng), {1.0, 2.0}, Family::Elliptic};
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec x = random_unit_box(4, rng);
    Vec y;
    const bool same = trial % 2 == 0;
    if (same) {
      y = matvec(element_at(spec, rng.uniform(0.0, 6.28)).matrix, x);
    } else {
      // Change one block norm in canonical coordinates: guaranteed off-orbit.
      Vec v = matvec_t(spec.A, x);
      v[0] *= 1.5;
      v[1] *= 1.5;
      y = matvec(spec.A, v);
    }
    const InvRepOutput a = inv_rep(x, spec);
    const InvRepOutput b = inv_rep(y, spec);
    if (a.status != InvRepStatus::Ok || b.status != InvRepStatus::Ok) continue;
    const bool rep_equal = vec_dist(a.rep, b.rep) < 1e-7;
    const bool oracle_equal = orbit_equal_oracle(x, y, spec, 400);
    EXPECT_EQ(rep_equal, same);
    EXPECT_EQ(oracle_equal, same);
    ++checked;
  }
  EXPECT_GE(checked, 90);
}
