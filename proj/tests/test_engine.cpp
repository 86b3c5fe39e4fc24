#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "uniid/checkpoint.hpp"
#include "uniid/grad_check.hpp"
#include "uniid/nn_ops.hpp"
#include "uniid/optim.hpp"
#include "uniid/rng.hpp"
#include "uniid/tensor.hpp"

using namespace uniid;

using T64 = TensorT<double>;
using Store64 = ParamStoreT<double>;

TEST_CASE("matmul against identity") {
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    auto c = matmul(a, eye);
    CHECK(c.at(0, 0) == 1.0f);
    CHECK(c.at(0, 1) == 2.0f);
    CHECK(c.at(1, 0) == 3.0f);
    CHECK(c.at(1, 1) == 4.0f);
}

TEST_CASE("softmax of a constant row is uniform") {
    auto y = softmax(Tensor::from({3}, {0, 0, 0}));
    for (int i = 0; i < 3; ++i) CHECK(y.at(i) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("l2 norm of a 3-4-5 triangle") {
    CHECK(l2_norm(Tensor::from({2}, {3, 4})).item() == doctest::Approx(5.0));
}

TEST_CASE("backward of sum(x*x) is 2x") {
    auto x = T64::from({3}, {1, 2, 3});
    x.set_requires_grad(true);
    sum_all(mul(x, x)).backward();
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
    CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("backward of l2_norm is the unit vector") {
    auto x = T64::from({2}, {3, 4});
    x.set_requires_grad(true);
    l2_norm(x).backward();
    CHECK(x.grad()[0] == doctest::Approx(0.6));
    CHECK(x.grad()[1] == doctest::Approx(0.8));
}

TEST_CASE("backward rejects non-scalar losses") {
    auto x = T64::from({2}, {1, 2});
    x.set_requires_grad(true);
    CHECK_THROWS_AS(mul(x, x).backward(), ShapeError);
}

TEST_CASE("shape errors name the op and both shapes") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({4, 2});
    try {
        add(a, b);
        FAIL("expected throw");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("add") != std::string::npos);
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("repeated backward accumulates additively") {
    auto x = T64::from({2}, {1, 2});
    x.set_requires_grad(true);
    auto loss = sum_all(mul(x, x));
    loss.backward();
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    CHECK(x.grad()[1] == doctest::Approx(8.0));
}

// ---------------------------------------------------------------------------
// Finite-difference property suite: every op in the set, randomized inputs,
// many seeds, 64-bit.
// ---------------------------------------------------------------------------

namespace {

// Wraps op under test into a scalar loss with a fixed random cotangent so the
// full Jacobian is exercised, then compares against central differences.
double fd_max_rel(const std::function<T64(Store64&)>& build, Store64& params, uint64_t seed) {
    Rng cr(seed ^ 0x5eedf00dull);
    auto loss_fn = [&]() {
        T64 y = build(params);
        // deterministic cotangent: elementwise product with fixed pseudo-noise
        std::vector<double> w(y.numel());
        Rng wr(seed ^ 0xc07a17ull);
        for (auto& v : w) v = wr.uniform(-1.0, 1.0);
        return sum_all(mul(y, T64::from(y.shape(), std::move(w))));
    };
    auto report = finite_diff_check<double>(loss_fn, params, 1e-4);
    REQUIRE(report.failure_location.empty());
    return report.max_rel_err;
}

Store64 make_params(const std::vector<std::pair<std::string, Shape>>& specs, uint64_t seed) {
    Store64 store;
    Rng rng(seed);
    for (const auto& [name, shape] : specs) store.create(name, shape, rng, 1.0);
    return store;
}

} // namespace

TEST_CASE("finite differences validate every op (property, 100 seeds)") {
    double worst = 0.0;
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        // elementwise + matmul family
        {
            auto st = make_params({{"a", {3, 4}}, {"b", {3, 4}}, {"m", {4, 2}}}, seed);
            worst = std::max(worst, fd_max_rel(
                [](Store64& s) {
                    auto a = s.at("a").tensor, b = s.at("b").tensor, m = s.at("m").tensor;
                    auto x = add(mul(a, b), smul(sub(a, b), 0.7));
                    return matmul(x, m);
                },
                st, seed));
        }
        // transpose / reshape / concat / slice / add_bias
        {
            auto st = make_params({{"a", {3, 4}}, {"b", {2, 4}}, {"bias", {4}}}, seed);
            worst = std::max(worst, fd_max_rel(
                [](Store64& s) {
                    auto a = s.at("a").tensor, b = s.at("b").tensor;
                    auto cat = concat(a, b, 0);                  // [5,4]
                    auto sl = slice(cat, 0, 1, 3);               // [3,4]
                    auto t = transpose(reshape(sl, {4, 3}));     // [3,4]
                    return add_bias(t, s.at("bias").tensor);
                },
                st, seed));
        }
        // softmax / log_softmax / silu / layer_norm
        {
            auto st = make_params({{"x", {3, 5}}, {"g", {5}}, {"be", {5}}}, seed);
            worst = std::max(worst, fd_max_rel(
                [](Store64& s) {
                    auto x = s.at("x").tensor;
                    auto ln = layer_norm(x, s.at("g").tensor, s.at("be").tensor);
                    return add(softmax(ln), add(log_softmax(x), silu(x)));
                },
                st, seed));
        }
        // reductions
        {
            auto st = make_params({{"x", {4, 3}}, {"y", {4, 3}}}, seed);
            worst = std::max(worst, fd_max_rel(
                [](Store64& s) {
                    auto x = s.at("x").tensor, y = s.at("y").tensor;
                    auto parts = concat(concat(mean_all(x), sum_all(y), 0),
                                        concat(l2_norm(x), squared_error(x, y), 0), 0);
                    return concat(parts, l2_norm_rows(x), 0);
                },
                st, seed));
        }
        // conv3x3 stride 1 and 2, upsample
        {
            auto st = make_params({{"x", {16, 2}}, {"w1", {18, 3}}, {"b1", {3}},
                                   {"w2", {27, 2}}, {"b2", {2}}},
                                  seed);
            worst = std::max(worst, fd_max_rel(
                [](Store64& s) {
                    auto h = conv3x3(s.at("x").tensor, s.at("w1").tensor, s.at("b1").tensor, 4, 4, 1);
                    h = conv3x3(h, s.at("w2").tensor, s.at("b2").tensor, 4, 4, 2); // [4, 2]
                    return upsample2x(h, 2, 2);
                },
                st, seed));
        }
        // embedding
        {
            auto st = make_params({{"table", {6, 3}}}, seed);
            worst = std::max(worst, fd_max_rel(
                [](Store64& s) {
                    return embedding(s.at("table").tensor, {1, 4, 1, 5});
                },
                st, seed));
        }
    }
    CHECK(worst < 1e-4);
    MESSAGE("op property suite max rel err: ", worst);
}

TEST_CASE("random 4-layer MLP matches finite differences") {
    for (uint64_t seed : {7ull, 17ull, 37ull}) {
        auto st = make_params({{"w1", {6, 8}}, {"b1", {8}}, {"w2", {8, 8}}, {"b2", {8}},
                               {"w3", {8, 8}}, {"b3", {8}}, {"w4", {8, 4}}, {"b4", {4}}},
                              seed);
        Rng rng(seed + 1);
        auto x = T64::randn({5, 6}, rng);
        auto target = T64::randn({5, 4}, rng);
        auto loss_fn = [&]() {
            auto h = silu(add_bias(matmul(x, st.at("w1").tensor), st.at("b1").tensor));
            h = silu(add_bias(matmul(h, st.at("w2").tensor), st.at("b2").tensor));
            h = silu(add_bias(matmul(h, st.at("w3").tensor), st.at("b3").tensor));
            h = add_bias(matmul(h, st.at("w4").tensor), st.at("b4").tensor);
            return squared_error(h, target);
        };
        auto report = finite_diff_check<double>(loss_fn, st, 1e-4);
        CHECK(report.pass);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("linear layer gradient is exact to 1e-8") {
    auto st = make_params({{"w", {4, 3}}}, 11);
    Rng rng(12);
    auto x = T64::randn({5, 4}, rng);
    auto y = T64::randn({5, 3}, rng);
    auto loss_fn = [&]() { return squared_error(matmul(x, st.at("w").tensor), y); };
    auto report = finite_diff_check<double>(loss_fn, st, 1e-8);
    CHECK(report.pass);
    CHECK(report.max_rel_err < 1e-8);
}

TEST_CASE("zero-parameter model yields an empty passing report") {
    Store64 st;
    auto loss_fn = []() { return T64::scalar(3.0); };
    auto report = finite_diff_check<double>(loss_fn, st, 1e-4);
    CHECK(report.pass);
    CHECK(report.entries.empty());
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = T64::randn({6}, rng);
        x.set_requires_grad(true);
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);

        auto l1 = [&x]() { return sum_all(mul(x, x)); };
        auto l2 = [&x]() { return l2_norm(silu(x)); };

        x.zero_grad();
        l1().backward();
        auto g1 = x.grad();
        x.zero_grad();
        l2().backward();
        auto g2 = x.grad();
        x.zero_grad();
        add(smul(l1(), a), smul(l2(), b)).backward();
        for (int i = 0; i < 6; ++i)
            CHECK(std::abs(x.grad()[i] - (a * g1[i] + b * g2[i])) < 1e-10);
    }
}

TEST_CASE("identical seed and op sequence is bit-identical") {
    auto run = [] {
        Rng rng(1234);
        auto a = Tensor::randn({8, 8}, rng);
        auto b = Tensor::randn({8, 8}, rng);
        return matmul(softmax(a), silu(b)).data();
    };
    CHECK(run() == run());
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

TEST_CASE("adamw first step has unit normalized magnitude") {
    ParamStore st;
    Rng rng(1);
    auto& p = st.create_filled("p", {1}, 1.0f);
    p.tensor.grad()[0] = 1.0f;
    AdamW opt(st, 0.1f, 0.0f);
    opt.step();
    CHECK(p.tensor.data()[0] == doctest::Approx(0.9).epsilon(1e-4));
    CHECK(opt.state().step_count == 1);
    CHECK(p.tensor.grad()[0] == 0.0f); // zeroed after apply
}

TEST_CASE("frozen parameters receive zero updates") {
    ParamStore st;
    auto& p = st.create_filled("p", {2}, 2.0f);
    p.frozen = true;
    p.tensor.set_requires_grad(false);
    AdamW opt(st, 0.5f);
    opt.step(); // no grad needed for frozen
    CHECK(p.tensor.data()[0] == 2.0f);
    CHECK(p.tensor.data()[1] == 2.0f);
}

TEST_CASE("adamw converges on (p-3)^2") {
    ParamStore st;
    auto& p = st.create_filled("p", {1}, 0.0f);
    p.tensor.set_requires_grad(true);
    AdamW opt(st, 0.05f);
    for (int i = 0; i < 100; ++i) {
        st.zero_grad();
        auto loss = squared_error(p.tensor, Tensor::scalar(3.0f));
        loss.backward();
        opt.step();
    }
    CHECK(std::abs(p.tensor.data()[0] - 3.0f) < 0.1f);
    CHECK(opt.state().step_count == 100);
}

TEST_CASE("adamw rejects missing gradients on unfrozen parameters") {
    ParamStore st;
    st.create_filled("p", {3}, 1.0f);
    AdamW opt(st, 0.1f);
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("missing gradient"), std::runtime_error);
}

TEST_CASE("parameter names must be unique") {
    ParamStore st;
    st.create_filled("p", {1}, 0.0f);
    CHECK_THROWS(st.create_filled("p", {2}, 0.0f));
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint round trip and determinism") {
    namespace fs = std::filesystem;
    const std::string dir = fs::temp_directory_path() / "uniid_ckpt_test";
    fs::create_directories(dir);

    Checkpoint ck;
    ck.put_f32("layer.w", {2, 3}, {1, 2, 3, 4, 5, 6});
    ck.put_f64("precise", {2}, {0.25, -0.5});
    ck.put_text("__meta/vocab", "<pad>\n<start>\nhello");
    ck.save(dir + "/a.ckpt");
    ck.save(dir + "/b.ckpt");

    // same content -> identical bytes
    std::ifstream fa(dir + "/a.ckpt", std::ios::binary), fb(dir + "/b.ckpt", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), {});
    std::string sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    CHECK(sa.substr(0, 4) == "UIDC");

    auto loaded = Checkpoint::load(dir + "/a.ckpt");
    CHECK(loaded.at("layer.w").f32 == std::vector<float>({1, 2, 3, 4, 5, 6}));
    CHECK(loaded.at("layer.w").dims == std::vector<uint64_t>({2, 3}));
    CHECK(loaded.at("precise").f64 == std::vector<double>({0.25, -0.5}));
    CHECK(loaded.get_text("__meta/vocab") == "<pad>\n<start>\nhello");

    // corrupting a payload byte must trip the checksum; the last entry's
    // payload sits just before the trailing 8-byte checksum
    std::string corrupted = sa;
    corrupted[corrupted.size() - 10] ^= 0x40;
    std::ofstream(dir + "/c.ckpt", std::ios::binary) << corrupted;
    CHECK_THROWS_WITH_AS(Checkpoint::load(dir + "/c.ckpt"), doctest::Contains("checksum"),
                         std::runtime_error);
}

TEST_CASE("checkpoint store round trip") {
    ParamStore st;
    Rng rng(5);
    st.create("a.w", {3, 2}, rng, 1.0f);
    st.create("a.b", {2}, rng, 1.0f);

    Checkpoint ck;
    ck.put_store("model/", st);

    ParamStore st2;
    Rng rng2(6);
    st2.create("a.w", {3, 2}, rng2, 1.0f);
    st2.create("a.b", {2}, rng2, 1.0f);
    ck.load_store("model/", st2);
    CHECK(st2.at("a.w").tensor.data() == st.at("a.w").tensor.data());
    CHECK(st2.at("a.b").tensor.data() == st.at("a.b").tensor.data());
}
