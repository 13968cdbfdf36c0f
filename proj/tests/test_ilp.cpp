#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "rgns/ilp.hpp"
#include "test_support.hpp"

using namespace rgns;

namespace {

Mat<double> padding_W(int d, int C) {
    Mat<double> W(d, C);
    for (int i = 0; i < C; ++i) W(i, i) = 1.0;
    return W;
}

IlpParams<double> padding_ilp(int d, int C) {
    IlpParams<double> ilp;
    ilp.W = padding_W(d, C);
    ilp.B.assign(static_cast<std::size_t>(d), 0.0);
    refresh_pinv(ilp);
    return ilp;
}

}  // namespace

TEST_CASE("encode: padding embed") {
    auto ilp = padding_ilp(6, 2);
    Mat<double> chi(1, 2);
    chi(0, 0) = 1.0;
    chi(0, 1) = 2.0;
    const auto n = ilp_encode(ilp, chi);
    CHECK(n(0, 0) == 1.0);
    CHECK(n(0, 1) == 2.0);
    for (int j = 2; j < 6; ++j) CHECK(n(0, j) == 0.0);
}

TEST_CASE("encode: zero input returns the bias") {
    std::mt19937_64 rng(3);
    auto ilp = init_ilp<double>(8, 3, rng);
    for (std::size_t j = 0; j < ilp.B.size(); ++j) ilp.B[j] = 0.1 * static_cast<double>(j);
    Mat<double> chi(1, 3);
    const auto n = ilp_encode(ilp, chi);
    for (int j = 0; j < 8; ++j) CHECK(n(0, j) == ilp.B[static_cast<std::size_t>(j)]);
}

TEST_CASE("encode matches a matrix-vector oracle") {
    std::mt19937_64 rng(17);
    auto ilp = init_ilp<double>(10, 4, rng);
    for (auto& b : ilp.B) b = 0.01;
    Mat<double> chi(3, 4);
    for (auto& v : chi.a) v = std::normal_distribution<double>()(rng);
    const auto n = ilp_encode(ilp, chi);
    for (int i = 0; i < 3; ++i)
        for (int row = 0; row < 10; ++row) {
            double s = 0;
            for (int c = 0; c < 4; ++c) s += ilp.W(row, c) * chi(i, c);
            CHECK(n(i, row) == doctest::Approx(s + 0.01).epsilon(1e-14));
        }
}

TEST_CASE("decode(encode(x)) reconstructs to the documented bound") {
    std::mt19937_64 rng(23);
    auto ilp = init_ilp<double>(128, 23, rng);
    std::normal_distribution<double> dist(0.0, 1.0);
    double worst = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        Mat<double> chi(1, 23);
        for (auto& v : chi.a) v = dist(rng);
        const auto back = ilp_decode(ilp, ilp_encode(ilp, chi));
        double err2 = 0;
        for (int c = 0; c < 23; ++c) {
            const double d = back(0, c) - chi(0, c);
            err2 += d * d;
        }
        worst = std::max(worst, err2);
    }
    CHECK(worst < 1e-6);
    CHECK(worst < 1e-20);  // double precision leaves enormous margin
}

TEST_CASE("decode: n = B gives zero") {
    std::mt19937_64 rng(29);
    auto ilp = init_ilp<double>(9, 4, rng);
    for (auto& b : ilp.B) b = std::normal_distribution<double>()(rng);
    Mat<double> n(1, 9);
    for (int j = 0; j < 9; ++j) n(0, j) = ilp.B[static_cast<std::size_t>(j)];
    const auto chi = ilp_decode(ilp, n);
    for (int c = 0; c < 4; ++c) CHECK(chi(0, c) == 0.0);
}

TEST_CASE("decode off range(W) is the least-squares solution") {
    std::mt19937_64 rng(31);
    auto ilp = init_ilp<double>(12, 5, rng);
    for (auto& b : ilp.B) b = std::normal_distribution<double>()(rng);
    std::vector<double> n(12);
    for (auto& v : n) v = std::normal_distribution<double>()(rng);

    Mat<double> N(1, 12);
    for (int j = 0; j < 12; ++j) N(0, j) = n[static_cast<std::size_t>(j)];
    const auto chi = ilp_decode(ilp, N);

    std::vector<double> shifted(12);
    for (int j = 0; j < 12; ++j) shifted[static_cast<std::size_t>(j)] = n[static_cast<std::size_t>(j)] - ilp.B[static_cast<std::size_t>(j)];
    const auto oracle = testsupport::normal_equations_solve(cast_mat<double>(ilp.W), shifted);
    for (int c = 0; c < 5; ++c)
        CHECK(chi(0, c) == doctest::Approx(oracle[static_cast<std::size_t>(c)]).epsilon(1e-9));
}

TEST_CASE("least-squares optimality against random competitors") {
    std::mt19937_64 rng(37);
    auto ilp = init_ilp<double>(16, 6, rng);
    std::normal_distribution<double> dist(0.0, 1.0);
    Mat<double> N(1, 16);
    for (auto& v : N.a) v = dist(rng);
    const auto chi = ilp_decode(ilp, N);

    const auto residual = [&](const Mat<double>& x) {
        double s = 0;
        for (int row = 0; row < 16; ++row) {
            double w = 0;
            for (int c = 0; c < 6; ++c) w += ilp.W(row, c) * x(0, c);
            const double d = w - (N(0, row) - ilp.B[static_cast<std::size_t>(row)]);
            s += d * d;
        }
        return std::sqrt(s);
    };
    const double best = residual(chi);
    for (int trial = 0; trial < 100; ++trial) {
        Mat<double> other(1, 6);
        for (auto& v : other.a) v = dist(rng);
        CHECK(best <= residual(other) + 1e-9);
    }
}

TEST_CASE("projection idempotence: encode(decode(n)) is a fixed point") {
    std::mt19937_64 rng(41);
    auto ilp = init_ilp<double>(20, 7, rng);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Mat<double> n(1, 20);
        for (auto& v : n.a) v = dist(rng);
        const auto p1 = ilp_encode(ilp, ilp_decode(ilp, n));
        const auto p2 = ilp_encode(ilp, ilp_decode(ilp, p1));
        for (int j = 0; j < 20; ++j) CHECK(std::abs(p2(0, j) - p1(0, j)) <= 1e-8);
    }
}

TEST_CASE("decode with a stale pseudo-inverse is a contract violation") {
    std::mt19937_64 rng(43);
    auto ilp = init_ilp<double>(8, 3, rng);
    ilp.stale = true;
    Mat<double> n(1, 8);
    CHECK_THROWS_AS((void)ilp_decode(ilp, n), contract_error);
}

TEST_CASE("refresh_pinv: idempotent for unchanged W") {
    std::mt19937_64 rng(47);
    auto ilp = init_ilp<double>(12, 5, rng);
    const auto first = ilp.W_pinv.a;
    refresh_pinv(ilp);
    CHECK(ilp.W_pinv.a == first);
}

TEST_CASE("refresh_pinv: Moore-Penrose holds after a perturbation") {
    std::mt19937_64 rng(53);
    auto ilp = init_ilp<double>(24, 9, rng);
    ilp.W(3, 4) += 0.25;
    ilp.stale = true;
    refresh_pinv(ilp);
    // W_pinv * W = I for a full-column-rank W
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) {
            double s = 0;
            for (int r = 0; r < 24; ++r) s += ilp.W_pinv(i, r) * ilp.W(r, j);
            CHECK(std::abs(s - (i == j ? 1.0 : 0.0)) <= 1e-10);
        }
}

TEST_CASE("refresh_pinv: scaling W by 2 scales the pseudo-inverse by 1/2") {
    std::mt19937_64 rng(59);
    auto ilp = init_ilp<double>(10, 4, rng);
    const auto before = ilp.W_pinv;
    for (auto& w : ilp.W.a) w *= 2.0;
    refresh_pinv(ilp);
    for (std::size_t i = 0; i < before.a.size(); ++i)
        CHECK(ilp.W_pinv.a[i] == doctest::Approx(before.a[i] / 2.0).epsilon(1e-10));
}

TEST_CASE("refresh_pinv: rank deficiency aborts with a degenerate-projection error") {
    IlpParams<double> ilp;
    ilp.W = Mat<double>(6, 3);
    for (int i = 0; i < 6; ++i) ilp.W(i, 0) = 1.0;  // rank 1
    ilp.B.assign(6, 0.0);
    CHECK_THROWS_WITH_AS(refresh_pinv(ilp), doctest::Contains("degenerate"), numeric_error);
}

TEST_CASE("encode_edges: zero-weight net outputs the bias, deterministically") {
    std::mt19937_64 rng(61);
    EdgeEncoderParams<double> enc;
    enc.net = make_mlp<double>({3, 4, 6}, rng);
    for (auto& l : enc.net.layers) l.W.fill(0.0);
    enc.net.layers.back().b = {1, 2, 3, 4, 5, 6};
    Mat<double> geom(5, 3);
    for (auto& v : geom.a) v = std::normal_distribution<double>()(rng);
    const auto lat = encode_edges(enc, geom);
    for (int e = 0; e < 5; ++e)
        for (int j = 0; j < 6; ++j) CHECK(lat(e, j) == static_cast<double>(j + 1));

    Mat<double> two(2, 3);
    for (int c = 0; c < 3; ++c) two(0, c) = two(1, c) = 0.37 * (c + 1);
    auto enc2 = enc;
    enc2.net = make_mlp<double>({3, 8, 6}, rng);
    const auto lat2 = encode_edges(enc2, two);
    for (int j = 0; j < 6; ++j) CHECK(lat2(0, j) == lat2(1, j));
}

TEST_CASE("encode_edges agrees with mlp_forward and splits into halves") {
    std::mt19937_64 rng(67);
    EdgeEncoderParams<double> enc;
    enc.net = make_mlp<double>({4, 8, 8}, rng);
    Mat<double> geom(7, 4);
    for (auto& v : geom.a) v = std::normal_distribution<double>()(rng);
    const auto lat = encode_edges(enc, geom);
    const auto oracle = mlp_forward(enc.net, geom);
    CHECK(lat.a == oracle.a);

    Mat<double> e1, e2;
    split_halves(lat, e1, e2);
    CHECK(e1.cols == 4);
    CHECK(e2.cols == 4);
    for (int e = 0; e < 7; ++e)
        for (int c = 0; c < 4; ++c) {
            CHECK(e1(e, c) == lat(e, c));
            CHECK(e2(e, c) == lat(e, c + 4));
        }
    const auto joined = join_halves(e1, e2);
    CHECK(joined.a == lat.a);
}

TEST_CASE("init_ilp rejects latent width not exceeding the physical width") {
    std::mt19937_64 rng(71);
    CHECK_THROWS_AS((void)init_ilp<double>(4, 4, rng), config_error);
    CHECK_THROWS_AS((void)init_ilp<double>(3, 4, rng), config_error);
}
