#include <doctest.h>

#include <cmath>
#include <random>

#include "fqr/penalty.hpp"

using namespace fqr;

TEST_SUITE_BEGIN("penalty");

TEST_CASE("scad piecewise values") {
    const ScadParams params(1.0, 3.7);
    CHECK(scad(params, 0.0) == 0.0);
    CHECK(scad(params, 0.5) == doctest::Approx(0.5));           // linear branch
    CHECK(scad(params, 10.0) == doctest::Approx(2.35));         // (a+1) lambda^2 / 2
    CHECK(scad(params, 3.7) == doctest::Approx(2.35));          // flat from a*lambda on
    CHECK_THROWS(scad(params, -0.1));
    CHECK_THROWS(ScadParams(1.0, 2.0));
    CHECK_THROWS(ScadParams(-1.0, 3.7));
}

TEST_CASE("scad derivative branches") {
    const ScadParams params(1.0, 3.7);
    CHECK(scad_deriv(params, 0.5) == doctest::Approx(1.0));
    CHECK(scad_deriv(params, 2.0) == doctest::Approx(1.7 / 2.7));
    CHECK(scad_deriv(params, 3.7) == doctest::Approx(0.0));
    CHECK(scad_deriv(params, 100.0) == 0.0);
    CHECK_THROWS(scad_deriv(params, -1e-9));
}

TEST_CASE("scad and derivative are continuous at the break points") {
    for (double lambda : {0.05, 0.7, 2.0}) {
        for (double a : {2.5, 3.7, 6.0}) {
            const ScadParams params(lambda, a);
            const double eps = 1e-9;
            for (double knot : {lambda, a * lambda}) {
                CHECK(std::abs(scad(params, knot - eps) - scad(params, knot + eps)) < 1e-8);
                CHECK(std::abs(scad(params, knot - eps) - scad(params, knot)) < 1e-8);
                CHECK(std::abs(scad_deriv(params, knot - eps) - scad_deriv(params, knot + eps)) <
                      1e-8);
            }
            // non-decreasing, non-negative derivative
            double prev = 0.0;
            for (double u = 0.0; u < 1.5 * a * lambda; u += 0.01 * lambda) {
                CHECK(scad(params, u) >= prev - 1e-12);
                prev = scad(params, u);
                CHECK(scad_deriv(params, u) >= 0.0);
            }
        }
    }
}

namespace {

Eigen::VectorXd constant_theta(const SplineBasis& basis, double c) {
    // partition of unity: coefficients c reproduce the constant function c
    return Eigen::VectorXd::Constant(basis.size(), c);
}

}  // namespace

TEST_CASE("subinterval rms of a constant function equals |c|") {
    const SplineBasis basis(0.0, 2.0, 8, 3);
    const GramSet gram = compute_gram_set(basis, 2);
    for (double c : {1.0, -0.3, 4.0}) {
        const Eigen::VectorXd rms = subinterval_rms(basis, gram, constant_theta(basis, c));
        for (int j = 0; j < basis.num_subintervals(); ++j) {
            CHECK(rms[j] == doctest::Approx(std::abs(c)).epsilon(1e-10));
        }
    }
}

TEST_CASE("fscad of zero and of a large constant") {
    const SplineBasis basis(0.0, 2.0, 8, 3);
    const GramSet gram = compute_gram_set(basis, 2);
    const std::vector<ScadParams> params{ScadParams(0.1, 3.7)};
    CHECK(fscad_value(basis, gram, params, Eigen::VectorXd::Zero(basis.size())) == 0.0);
    // c = 1 >= a*lambda = 0.37: every subinterval sits on the flat tail
    const double expected = basis.num_subintervals() * 0.5 * 4.7 * 0.1 * 0.1;
    CHECK(fscad_value(basis, gram, params, constant_theta(basis, 1.0)) ==
          doctest::Approx(expected).epsilon(1e-10));
    CHECK_THROWS(fscad_value(basis, gram, params, Eigen::VectorXd::Zero(3)));
}

TEST_CASE("single active coefficient only touches its covered subintervals") {
    const SplineBasis basis(0.0, 1.0, 10, 3);
    const GramSet gram = compute_gram_set(basis, 2);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(basis.size());
    const int k = 6;
    theta[k] = 2.0;
    const Eigen::VectorXd rms = subinterval_rms(basis, gram, theta);
    for (int j = 0; j < basis.num_subintervals(); ++j) {
        if (j >= basis.support_first(k) && j <= basis.support_last(k)) {
            CHECK(rms[j] > 0.0);
        } else {
            CHECK(rms[j] == 0.0);
        }
    }
}

TEST_CASE("lqa weights vanish when lambda is zero or beta clears the flat tail") {
    const SplineBasis basis(0.0, 2.0, 8, 3);
    const GramSet gram = compute_gram_set(basis, 2);
    const Eigen::VectorXd anchor = constant_theta(basis, 1.0);

    const LqaWeights none = lqa_weights(basis, gram, {ScadParams(0.0, 3.7)}, anchor);
    CHECK(none.blocks[0].cwiseAbs().maxCoeff() == 0.0);

    // constant 1 with a*lambda = 0.37 < 1: derivative is identically zero
    const LqaWeights flat = lqa_weights(basis, gram, {ScadParams(0.1, 3.7)}, anchor);
    CHECK(flat.blocks[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(flat.r2_constant == doctest::Approx(8 * 0.5 * 4.7 * 0.01));
}

TEST_CASE("lqa weight formula on a piecewise-constant basis") {
    // with p = 0 the subinterval RMS is |theta_j| and W_j = (T/K) e_j e_j'
    const SplineBasis basis(0.0, 1.0, 4, 0);
    const GramSet gram = compute_gram_set(basis, 0);
    const double lambda = 0.4, width = 0.25;
    Eigen::VectorXd anchor(4);
    anchor << 0.2, 0.0, 1.0, 3.0;  // linear branch, at zero, middle branch, flat
    const double eps = 1e-6 * width;
    const LqaWeights w = lqa_weights(basis, gram, {ScadParams(lambda, 3.7)}, anchor, eps);
    const auto& block = w.blocks[0];
    // j=0: pdot = lambda (|0.2| <= lambda), denominator width*0.2 + eps
    CHECK(block(0, 0) ==
          doctest::Approx(0.5 * lambda / (width * 0.2 + eps) * width).epsilon(1e-12));
    // j=1: anchor zero, pdot = lambda, denominator eps
    CHECK(block(1, 1) == doctest::Approx(0.5 * lambda / eps * width).epsilon(1e-12));
    // j=2: middle branch pdot = (a lambda - u)/(a-1) at u=1
    const double pdot = (3.7 * lambda - 1.0) / 2.7;
    CHECK(block(2, 2) == doctest::Approx(0.5 * pdot / (width * 1.0 + eps) * width));
    // j=3: flat tail
    CHECK(block(3, 3) == 0.0);
    // off-diagonals vanish for p = 0
    CHECK(std::abs(block(0, 1)) == 0.0);
}

TEST_CASE("lqa weights are block-diagonal PSD") {
    const SplineBasis basis(0.0, 1.0, 10, 3);
    const GramSet gram = compute_gram_set(basis, 2);
    std::mt19937_64 rng(23);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd anchor(2 * basis.size());
    for (int i = 0; i < anchor.size(); ++i) anchor[i] = 0.3 * gauss(rng);
    const std::vector<ScadParams> params{ScadParams(0.2, 3.7), ScadParams(0.05, 3.7)};
    const LqaWeights w = lqa_weights(basis, gram, params, anchor);
    REQUIRE(w.blocks.size() == 2);
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd x(anchor.size());
        for (int i = 0; i < x.size(); ++i) x[i] = gauss(rng);
        CHECK(w.quadratic_form(x) >= -1e-12);
    }
}

TEST_CASE("lqa surrogate touches the fscad value at the anchor") {
    const SplineBasis basis(-1.0, 1.0, 12, 3);
    const GramSet gram = compute_gram_set(basis, 2);
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss;
    const std::vector<ScadParams> params{ScadParams(0.15, 3.7)};
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd anchor(basis.size());
        for (int i = 0; i < anchor.size(); ++i) anchor[i] = 0.5 * gauss(rng);
        const LqaWeights w = lqa_weights(basis, gram, params, anchor);
        const double surrogate = w.quadratic_form(anchor) + w.r2_constant;
        const double exact = fscad_value(basis, gram, params, anchor);
        // the epsilon perturbation only shrinks the quadratic term, by at most
        // (eps / width) * sum_j pdot(s_j) s_j / 2
        const Eigen::VectorXd rms = subinterval_rms(basis, gram, anchor);
        double bound = 1e-12;
        const double width = basis.domain_length() / basis.num_subintervals();
        for (int j = 0; j < basis.num_subintervals(); ++j) {
            bound += 0.5 * scad_deriv(params[0], rms[j]) * rms[j] * w.epsilon /
                     (width * rms[j] + w.epsilon);
        }
        CHECK(surrogate <= exact + 1e-12);
        CHECK(exact - surrogate <= bound);
    }
}

TEST_SUITE_END();
