#include "dsrn/losses.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace dsrn;
using dsrn::test::constant_tensor;
using dsrn::test::random_tensor;

namespace {

template <typename T>
std::vector<std::vector<T>> extractor_weights(const RandomConvExtractor<T>& e, bool bias) {
    std::vector<std::vector<T>> out;
    for (std::size_t i = 0; i < e.stages(); ++i) out.push_back(bias ? e.conv(i).bias.value : e.conv(i).weight.value);
    return out;
}

double brute_perceptual(const Tensor<double>& a, const Tensor<double>& b, const RandomConvExtractor<double>& e) {
    const auto w = extractor_weights(e, false), bs = extractor_weights(e, true);
    const auto fa = test::ref_conv_stack_features(a, w, bs, 0.2);
    const auto fb = test::ref_conv_stack_features(b, w, bs, 0.2);
    double total = 0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        double s = 0;
        for (std::size_t i = 0; i < fa[l].size(); ++i) s += (fa[l][i] - fb[l][i]) * (fa[l][i] - fb[l][i]);
        total += s / double(fa[l].size());
    }
    return total;
}

}  // namespace

TEST_CASE("l1 and l2 examples") {
    Rng rng(50);
    const auto t = random_tensor(rng, 6, 5, 3, 0, 0.9);
    Image off = t;
    for (auto& v : off.values()) v += 0.1f;
    CHECK(l1_loss(t, t) == 0.0f);
    CHECK(l2_loss(t, t) == 0.0f);
    CHECK(l1_loss(off, t) == doctest::Approx(0.1).epsilon(1e-5));
    CHECK(l2_loss(off, t) == doctest::Approx(0.01).epsilon(1e-4));
    CHECK(test::error_code_of([&] { (void)l1_loss(t, Image(6, 4, 3)); }) == ErrorCode::dimension);
    CHECK(test::error_code_of([&] { (void)l2_loss(t, Image(5, 5, 3)); }) == ErrorCode::dimension);
}

TEST_CASE("property: l1 and l2 match elementwise means and lie in [0,1]") {
    Rng rng(51);
    for (int trial = 0; trial < 20; ++trial) {
        const int h = 1 + int(rng.below(20)), w = 1 + int(rng.below(20));
        const auto a = random_tensor<double>(rng, h, w, 3), b = random_tensor<double>(rng, h, w, 3);
        double s1 = 0, s2 = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            s1 += std::abs(a[i] - b[i]);
            s2 += (a[i] - b[i]) * (a[i] - b[i]);
        }
        const double n = double(a.size());
        CHECK(l1_loss(a, b) == doctest::Approx(s1 / n).epsilon(1e-12));
        CHECK(l2_loss(a, b) == doctest::Approx(s2 / n).epsilon(1e-12));
        CHECK(l1_loss(a, b) >= 0.0);
        CHECK(l1_loss(a, b) <= 1.0);
        CHECK(l2_loss(a, b) >= 0.0);
        CHECK(l2_loss(a, b) <= 1.0);
    }
}

TEST_CASE("gaussian window is normalised and symmetric") {
    const auto g = gaussian_window(11, 1.5);
    REQUIRE(g.size() == 11);
    double s = 0;
    for (double v : g) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    for (int i = 0; i < 5; ++i) CHECK(g[std::size_t(i)] == doctest::Approx(g[std::size_t(10 - i)]).epsilon(1e-15));
    CHECK(g[5] / g[4] == doctest::Approx(std::exp(1.0 / (2 * 1.5 * 1.5))).epsilon(1e-12));
}

TEST_CASE("ssim examples") {
    Rng rng(52);
    const auto a = random_tensor(rng, 32, 32, 3), b = random_tensor(rng, 32, 32, 3);
    CHECK(ssim_loss(a, a) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(ssim_loss(a, b) == doctest::Approx(double(ssim_loss(b, a))).epsilon(1e-6));
    CHECK(double(ssim_loss(a, b)) == doctest::Approx(1.0 - test::ref_ssim(a, b)).epsilon(1e-4));
    CHECK(test::error_code_of([&] { (void)ssim_loss(Image(10, 32, 3), Image(10, 32, 3)); }) ==
          ErrorCode::dimension);
    CHECK(test::error_code_of([&] { (void)ssim_loss(a, Image(32, 16, 3)); }) == ErrorCode::dimension);
}

TEST_CASE("ssim against the direct 2-D reference on a fixture pair") {
    // Smooth gradient against a noisy, shifted copy: covers structure, contrast and luminance terms.
    Tensor<double> a(32, 32, 3), b(32, 32, 3);
    Rng rng(53);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) {
                a.at(y, x, c) = 0.5 + 0.4 * std::sin(0.2 * x + 0.3 * y + c);
                b.at(y, x, c) = std::clamp(0.9 * a.at(y, x, c) + 0.05 + rng.uniform(-0.1, 0.1), 0.0, 1.0);
            }
    const double ref = test::ref_ssim(a, b);
    CHECK(ssim_index(a, b) == doctest::Approx(ref).epsilon(1e-10));
    CHECK(ssim_loss(a, b) == doctest::Approx(1.0 - ref).epsilon(1e-10));
}

TEST_CASE("property: ssim loss in [0,2] and symmetric") {
    Rng rng(54);
    for (int trial = 0; trial < 10; ++trial) {
        const int h = 11 + int(rng.below(12)), w = 11 + int(rng.below(12));
        const auto a = random_tensor<double>(rng, h, w, 3), b = random_tensor<double>(rng, h, w, 3);
        const double l = ssim_loss(a, b);
        CHECK(l >= 0.0);
        CHECK(l <= 2.0);
        CHECK(l == doctest::Approx(ssim_loss(b, a)).epsilon(1e-12));
        CHECK(l == doctest::Approx(1.0 - test::ref_ssim(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("perceptual loss") {
    Rng rng(55);
    const RandomConvExtractor<double> ext(77);
    CHECK(ext.stages() == 3);
    CHECK(ext.conv(0).out_channels() == 16);
    CHECK(ext.conv(1).out_channels() == 32);
    CHECK(ext.conv(2).out_channels() == 64);
    const auto a = random_tensor<double>(rng, 16, 16, 3), b = random_tensor<double>(rng, 16, 16, 3);
    CHECK(perceptual_loss(a, a, ext) == 0.0);
    CHECK(perceptual_loss(a, b, ext) == doctest::Approx(brute_perceptual(a, b, ext)).epsilon(1e-10));

    const IdentityExtractor<double> id;
    CHECK(perceptual_loss(a, b, id) == doctest::Approx(l2_loss(a, b)).epsilon(1e-14));

    const RandomConvExtractor<double> same(77), other(78);
    CHECK(perceptual_loss(a, b, same) == perceptual_loss(a, b, ext));
    CHECK(perceptual_loss(a, b, other) != perceptual_loss(a, b, ext));

    const RandomConvExtractor<double> gray(77, {16, 32, 64}, 1);
    CHECK(test::error_code_of([&] { (void)perceptual_loss(a, b, gray); }) == ErrorCode::config);
}

TEST_CASE("tv loss") {
    Tensor<double> step(1, 2, 1);  // 2 wide, 1 tall
    step[1] = 1.0;
    CHECK(tv_loss(step) == doctest::Approx(1.0));
    Tensor<double> tall(2, 1, 1);
    tall[1] = 1.0;
    CHECK(tv_loss(tall) == doctest::Approx(1.0));
    CHECK(tv_loss(constant_tensor<double>(5, 7, 3, 0.3)) == 0.0);
    // 2x2 single channel [[0,1],[1,0]]: four differences of magnitude 1.
    Tensor<double> checker(2, 2, 1);
    checker[1] = checker[2] = 1.0;
    CHECK(tv_loss(checker) == doctest::Approx(1.0));
    CHECK(test::error_code_of([] { (void)tv_loss(Tensor<double>(1, 1, 3)); }) == ErrorCode::dimension);

    Rng rng(56);
    for (int trial = 0; trial < 10; ++trial) {
        auto x = random_tensor<double>(rng, 2 + int(rng.below(9)), 2 + int(rng.below(9)), 3);
        const double before = tv_loss(x);
        const double shift = rng.uniform(-1, 1);
        for (auto& v : x.values()) v += shift;
        CHECK(tv_loss(x) == doctest::Approx(before).epsilon(1e-9));
    }
}

TEST_CASE("combined loss is the weighted sum of its terms") {
    Rng rng(57);
    const RandomConvExtractor<double> ext(3);
    const auto a = random_tensor<double>(rng, 16, 16, 3), b = random_tensor<double>(rng, 16, 16, 3);
    const double l1 = l1_loss(a, b), ls = ssim_loss(a, b), lp = perceptual_loss(a, b, ext), lt = tv_loss(a);
    const LossTerms t = combined_loss_terms(a, b, LossWeights{}, ext);
    CHECK(t.l1 == doctest::Approx(l1).epsilon(1e-14));
    CHECK(t.ssim == doctest::Approx(ls).epsilon(1e-14));
    CHECK(t.perceptual == doctest::Approx(lp).epsilon(1e-14));
    CHECK(t.tv == doctest::Approx(lt).epsilon(1e-14));
    CHECK(t.total == doctest::Approx(l1 + 5e-3 * ls + 6e-3 * lp + 2e-8 * lt).epsilon(1e-14));

    const auto c = constant_tensor<double>(16, 16, 3, 0.4);
    CHECK(combined_loss(c, c, LossWeights{}, ext) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK(combined_loss(a, b, LossWeights{1, 0, 0, 0}, ext) == doctest::Approx(l1).epsilon(1e-14));

    SUBCASE("property: linear in each weight") {
        for (int trial = 0; trial < 10; ++trial) {
            LossWeights w{rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2)};
            const double base = combined_loss(a, b, w, ext);
            const double k = rng.uniform(0.1, 3);
            LossWeights w1 = w;
            w1.ssim *= k;
            CHECK(combined_loss(a, b, w1, ext) - base == doctest::Approx((k - 1) * w.ssim * ls).epsilon(1e-9));
            LossWeights w2 = w;
            w2.perceptual *= k;
            CHECK(combined_loss(a, b, w2, ext) - base == doctest::Approx((k - 1) * w.perceptual * lp).epsilon(1e-9));
        }
    }
    LossWeights bad;
    bad.tv = -1;
    CHECK(test::error_code_of([&] { bad.validate(); }) == ErrorCode::config);
}

TEST_CASE("every loss gradient matches central differences on 8x8x3") {
    Rng rng(58);
    auto pred = random_tensor<double>(rng, 8, 8, 3);
    const auto target = random_tensor<double>(rng, 8, 8, 3);
    SsimOptions small;
    small.window = 7;
    const RandomConvExtractor<double> ext(9);
    const LossWeights w{1.0, 0.5, 0.7, 0.3};

    std::vector<std::pair<const char*, std::function<double(const Tensor<double>&, Tensor<double>*)>>> losses = {
        {"l1", [&](const Tensor<double>& p, Tensor<double>* g) { return l1_loss(p, target, g); }},
        {"l2", [&](const Tensor<double>& p, Tensor<double>* g) { return l2_loss(p, target, g); }},
        {"ssim", [&](const Tensor<double>& p, Tensor<double>* g) { return ssim_loss(p, target, small, g); }},
        {"perceptual", [&](const Tensor<double>& p, Tensor<double>* g) { return perceptual_loss(p, target, ext, g); }},
        {"tv", [&](const Tensor<double>& p, Tensor<double>* g) { return tv_loss(p, g); }},
        {"combined", [&](const Tensor<double>& p, Tensor<double>* g) {
             return combined_loss(p, target, w, ext, small, g);
         }},
    };
    for (auto& [name, f] : losses) {
        CAPTURE(name);
        Tensor<double> grad;
        (void)f(pred, &grad);
        REQUIRE(grad.same_shape(pred));
        const auto st = test::fd_check(pred, grad, [&] { return f(pred, nullptr); }, rng, 60);
        CAPTURE(st.worst_rel);
        CHECK(st.passed == st.checked);
    }
}

TEST_CASE("property: losses are non-negative and zero at equality") {
    Rng rng(59);
    const RandomConvExtractor<double> ext(10);
    for (int trial = 0; trial < 5; ++trial) {
        const auto a = random_tensor<double>(rng, 16, 16, 3), b = random_tensor<double>(rng, 16, 16, 3);
        CHECK(l1_loss(a, b) >= 0);
        CHECK(ssim_loss(a, b) >= 0);
        CHECK(perceptual_loss(a, b, ext) >= 0);
        CHECK(tv_loss(a) >= 0);
        CHECK(l1_loss(a, a) == 0);
        CHECK(perceptual_loss(a, a, ext) == 0);
        CHECK(std::abs(ssim_loss(a, a)) < 1e-12);
    }
}
