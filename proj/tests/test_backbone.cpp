#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fd_check.hpp"
#include "morec/backbone.hpp"
#include "morec/rng.hpp"
#include "test_util.hpp"

using namespace morec;

namespace {

MfModel tiny_model(int n_users, int n_items, int dim, bool use_bias = true) {
    MfModel m;
    m.n_users = n_users;
    m.n_items = n_items;
    m.dim = dim;
    m.use_bias = use_bias;
    m.user_emb.assign(static_cast<std::size_t>(n_users) * dim, 0.0);
    m.item_emb.assign(static_cast<std::size_t>(n_items) * dim, 0.0);
    m.item_bias.assign(n_items, 0.0);
    return m;
}

}  // namespace

TEST_SUITE_BEGIN("backbone");

TEST_CASE("score of a zero model is zero") {
    const auto m = tiny_model(2, 2, 4);
    CHECK(m.score(0, 1) == 0.0);
}

TEST_CASE("score is the dot product plus bias") {
    auto m = tiny_model(1, 1, 2);
    m.user_emb = {1.0, 2.0};
    m.item_emb = {3.0, -1.0};
    CHECK(m.score(0, 0) == doctest::Approx(1.0));
    m.item_bias[0] = 0.7;
    CHECK(m.score(0, 0) == doctest::Approx(1.7));

    auto bias_only = tiny_model(1, 1, 2);
    bias_only.item_bias[0] = 0.7;
    CHECK(bias_only.score(0, 0) == doctest::Approx(0.7));
}

TEST_CASE("score rejects out-of-range indices") {
    const auto m = tiny_model(2, 3, 2);
    CHECK_THROWS_AS(m.score(2, 0), std::out_of_range);
    CHECK_THROWS_AS(m.score(0, 3), std::out_of_range);
}

TEST_CASE("BPR loss at equal scores is ln 2") {
    const auto m = tiny_model(1, 3, 2);
    const int negs[2] = {1, 2};
    const auto r = sample_loss(m, 0, 0, negs, LossMode::bpr);
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("BCE loss in the symmetric case is ln 2") {
    const auto m = tiny_model(1, 2, 2);  // all scores 0 => sigmoid 0.5
    const int negs[1] = {1};
    const auto r = sample_loss(m, 0, 0, negs, LossMode::bce);
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("sample_loss rejects bad negatives") {
    const auto m = tiny_model(1, 2, 2);
    CHECK_THROWS_AS(sample_loss(m, 0, 0, std::vector<int>{}, LossMode::bpr),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_loss(m, 0, 0, std::vector<int>{0}, LossMode::bpr),
                    std::invalid_argument);
}

TEST_CASE("losses stay finite and non-negative under extreme scores") {
    auto m = tiny_model(1, 3, 1);
    m.user_emb = {100.0};
    m.item_emb = {50.0, -50.0, 49.0};
    for (const auto mode : {LossMode::bpr, LossMode::bce}) {
        const int negs[2] = {1, 2};
        const auto r = sample_loss(m, 0, 0, negs, mode);
        CHECK(std::isfinite(r.loss));
        CHECK(r.loss >= 0.0);
    }
}

TEST_CASE("analytic gradients match finite differences") {
    std::mt19937_64 g(99);
    rng::Normal normal;
    for (int trial = 0; trial < 25; ++trial) {
        const int n_users = 2 + static_cast<int>(g() % 18);
        const int n_items = 3 + static_cast<int>(g() % 17);
        const int dim = 1 + static_cast<int>(g() % 8);
        auto m = make_model(n_users, n_items, dim, trial % 2 == 0, 0.3, g());
        const int user = static_cast<int>(g() % n_users);
        const int pos = static_cast<int>(g() % n_items);
        std::vector<int> negs;
        const int n_negs = 1 + static_cast<int>(g() % 4);
        while (static_cast<int>(negs.size()) < n_negs) {
            const int cand = static_cast<int>(g() % n_items);
            if (cand != pos) negs.push_back(cand);
        }
        const LossMode mode = (trial % 2 == 0) ? LossMode::bpr : LossMode::bce;

        GradientBuffer analytic;
        analytic.resize_like(m);
        const auto r = sample_loss(m, user, pos, negs, mode);
        accumulate_sample_grad(m, user, pos, negs, r.grad, 1.0, analytic);

        const double err = gradient_relative_error(
            m, analytic, [&](const MfModel& model) {
                return sample_loss(model, user, pos, negs, mode).loss;
            });
        CHECK(err <= 1e-4);
    }
}

TEST_CASE("popularity-proportional negative sampling") {
    const std::vector<std::int64_t> counts = {3, 1, 0};
    auto g = rng::substream(17, "negtest");
    const int n = 100000;
    const auto draws = sample_negatives(counts, n, std::vector<int>{}, g);
    int c0 = 0, c2 = 0;
    for (int d : draws) {
        if (d == 0) ++c0;
        if (d == 2) ++c2;
    }
    CHECK(c2 == 0);
    CHECK(static_cast<double>(c0) / n == doctest::Approx(0.75).epsilon(0.03));
}

TEST_CASE("negative sampling respects the exclusion set") {
    const std::vector<std::int64_t> counts = {3, 1};
    auto g = rng::substream(18, "negtest");
    const int exclude[1] = {0};
    for (int d : sample_negatives(counts, 500, exclude, g)) CHECK(d == 1);
}

TEST_CASE("negative sampling with n=0 returns an empty list") {
    auto g = rng::substream(19, "negtest");
    CHECK(sample_negatives({1, 1}, 0, std::vector<int>{}, g).empty());
}

TEST_CASE("negative sampling errors when no candidate has mass") {
    auto g = rng::substream(20, "negtest");
    const int exclude[1] = {0};
    CHECK_THROWS_AS(sample_negatives({5, 0}, 1, exclude, g), std::runtime_error);
}

TEST_CASE("first optimizer step moves a parameter by about the learning rate") {
    auto m = tiny_model(1, 1, 1, false);
    m.user_emb = {0.5};
    AdamState opt;
    opt.resize_like(m);
    GradientBuffer grads;
    grads.resize_like(m);
    grads.user_emb[0] = 1.0;
    apply_gradients(m, opt, grads);
    CHECK(m.user_emb[0] == doctest::Approx(0.5 - 0.001).epsilon(1e-6));
    CHECK(opt.step == 1);
}

TEST_CASE("zero gradients leave a fresh model unchanged") {
    auto m = make_model(3, 3, 2, true, 0.1, 7);
    const auto before = m.user_emb;
    AdamState opt;
    opt.resize_like(m);
    GradientBuffer grads;
    grads.resize_like(m);
    apply_gradients(m, opt, grads);
    CHECK(m.user_emb == before);
}

TEST_CASE("optimizer state accumulates across steps") {
    // A zero gradient after a non-zero one still moves the parameter through
    // the first-moment state; a fresh optimizer does not.
    auto a = tiny_model(1, 1, 1, false);
    a.user_emb = {0.5};
    AdamState opt_a;
    opt_a.resize_like(a);
    GradientBuffer ones;
    ones.resize_like(a);
    ones.user_emb[0] = 1.0;
    GradientBuffer zeros;
    zeros.resize_like(a);
    apply_gradients(a, opt_a, ones);
    const double after_one = a.user_emb[0];
    apply_gradients(a, opt_a, zeros);

    auto b = tiny_model(1, 1, 1, false);
    b.user_emb = {after_one};
    AdamState opt_b;
    opt_b.resize_like(b);
    apply_gradients(b, opt_b, zeros);
    CHECK(a.user_emb[0] != after_one);
    CHECK(b.user_emb[0] == after_one);
}

TEST_CASE("non-finite gradient names the parameter block") {
    auto m = tiny_model(1, 1, 1);
    AdamState opt;
    opt.resize_like(m);
    GradientBuffer grads;
    grads.resize_like(m);
    grads.item_emb[0] = std::nan("");
    CHECK_THROWS_WITH_AS(apply_gradients(m, opt, grads), doctest::Contains("item_emb"),
                         std::runtime_error);
}

TEST_CASE("topk_recommend basics") {
    auto m = tiny_model(1, 3, 1, true);
    m.item_bias = {0.1, 0.9, 0.5};
    CHECK(topk_recommend(m, 0, 2, std::vector<int>{}) == std::vector<int>{1, 2});
    const int exclude[1] = {1};
    CHECK(topk_recommend(m, 0, 2, exclude) == std::vector<int>{2, 0});

    auto ties = tiny_model(1, 3, 1);
    CHECK(topk_recommend(ties, 0, 3, std::vector<int>{}) == std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(topk_recommend(ties, 0, 4, std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("topk_recommend equals the brute-force full sort") {
    std::mt19937_64 g(31);
    for (int trial = 0; trial < 30; ++trial) {
        const int n_items = 5 + static_cast<int>(g() % 40);
        auto m = make_model(3, n_items, 4, true, 0.5, g());
        std::vector<int> exclude;
        for (int e = 0; e < n_items; ++e)
            if (g() % 4 == 0) exclude.push_back(e);
        const int eligible = n_items - static_cast<int>(exclude.size());
        if (eligible < 1) continue;

        std::vector<std::pair<double, int>> all;
        for (int e = 0; e < n_items; ++e) {
            if (std::binary_search(exclude.begin(), exclude.end(), e)) continue;
            all.push_back({m.score(0, e), e});
        }
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (int k = 1; k <= eligible; k += std::max(1, eligible / 3)) {
            const auto got = topk_recommend(m, 0, k, exclude);
            for (int i = 0; i < k; ++i) CHECK(got[i] == all[i].second);
        }
    }
}

TEST_CASE("a separable 2x2 toy trains to near-zero BPR loss") {
    auto m = make_model(2, 2, 4, true, 0.1, 3);
    AdamState opt;
    opt.learning_rate = 0.05;
    opt.resize_like(m);
    GradientBuffer grads;
    grads.resize_like(m);
    double loss = 1.0;
    for (int step = 0; step < 500; ++step) {
        grads.clear();
        loss = 0.0;
        for (int u = 0; u < 2; ++u) {
            const int pos = u, neg = 1 - u;
            const int negs[1] = {neg};
            const auto r = sample_loss(m, u, pos, negs, LossMode::bpr);
            accumulate_sample_grad(m, u, pos, negs, r.grad, 0.5, grads);
            loss += 0.5 * r.loss;
        }
        apply_gradients(m, opt, grads);
    }
    CHECK(loss < 0.1);
}

TEST_CASE("checkpoints round-trip") {
    TempDir dir;
    const auto m = make_model(5, 7, 3, true, 0.2, 11);
    save_checkpoint(dir.file("m.ckpt"), m, 0xabcdef1234ULL);
    std::uint64_t digest = 0;
    const auto loaded = load_checkpoint(dir.file("m.ckpt"), &digest);
    CHECK(digest == 0xabcdef1234ULL);
    CHECK(loaded.n_users == 5);
    CHECK(loaded.n_items == 7);
    CHECK(loaded.dim == 3);
    CHECK(loaded.user_emb == m.user_emb);
    CHECK(loaded.item_emb == m.item_emb);
    CHECK(loaded.item_bias == m.item_bias);
    CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt")), std::runtime_error);
}

TEST_SUITE_END();
