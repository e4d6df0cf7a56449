#include "tracksort/cbow.hpp"
#include "tracksort/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;
using namespace tracksort;
using Catch::Approx;

namespace {

EmbeddingMatrix random_embeddings(int vocab, int dim, Rng& rng) {
    EmbeddingMatrix e;
    e.vocab_size = vocab;
    e.dim = dim;
    e.vectors.resize(static_cast<std::size_t>(vocab) * dim);
    e.context_vectors.resize(e.vectors.size());
    for (auto& v : e.vectors) v = rng.uniform(-0.8, 0.8);
    for (auto& v : e.context_vectors) v = rng.uniform(-0.8, 0.8);
    return e;
}

double rel_err(double a, double b) {
    double scale = std::max({1e-6, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

// central finite differences over every entry of both matrices
double max_grad_rel_err(EmbeddingMatrix e, const std::vector<TokenId>& ctx, TokenId target,
                        const std::vector<TokenId>& negs) {
    EmbeddingMatrix grad = e;
    std::fill(grad.vectors.begin(), grad.vectors.end(), 0.0);
    std::fill(grad.context_vectors.begin(), grad.context_vectors.end(), 0.0);
    double loss = cbow_loss_grad(e, ctx, target, negs, grad);
    REQUIRE(loss == Approx(cbow_loss(e, ctx, target, negs)));

    const double h = 1e-5;
    double worst = 0.0;
    auto probe = [&](std::vector<double>& params, const std::vector<double>& analytic) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = params[i];
            params[i] = saved + h;
            const double up = cbow_loss(e, ctx, target, negs);
            params[i] = saved - h;
            const double down = cbow_loss(e, ctx, target, negs);
            params[i] = saved;
            worst = std::max(worst, rel_err(analytic[i], (up - down) / (2 * h)));
        }
    };
    probe(e.vectors, grad.vectors);
    probe(e.context_vectors, grad.context_vectors);
    return worst;
}

std::vector<std::vector<TokenId>> planted_corpus() {
    // tokens 2 and 3 co-occur in every first-pool sentence, surrounded by
    // neighbors from pool {6..13}, so their context distributions nearly
    // coincide; token 4 only ever appears with the disjoint pool {14..21}
    std::vector<std::vector<TokenId>> corpus;
    Rng rng(314);
    for (int i = 0; i < 150; ++i) {
        std::vector<TokenId> ab{2, 3};
        for (int j = 0; j < 6; ++j) ab.push_back(6 + static_cast<TokenId>(rng.uniform_index(8)));
        shuffle(ab, rng);
        corpus.push_back(ab);

        std::vector<TokenId> c{4};
        for (int j = 0; j < 7; ++j) c.push_back(14 + static_cast<TokenId>(rng.uniform_index(8)));
        shuffle(c, rng);
        corpus.push_back(c);
    }
    return corpus;
}

} // namespace

TEST_CASE("cbow loss gradient matches finite differences", "[cbow]") {
    Rng rng(2024);
    SECTION("random instances") {
        for (int trial = 0; trial < 5; ++trial) {
            auto e = random_embeddings(12, 6, rng);
            std::vector<TokenId> ctx{1, 4, 7, 4}; // repeated token exercises accumulation
            TokenId target = 3;
            std::vector<TokenId> negs{5, 9, 9, 0};
            REQUIRE(max_grad_rel_err(e, ctx, target, negs) < 1e-5);
        }
    }
    SECTION("negative colliding with the target is ignored") {
        auto e = random_embeddings(8, 5, rng);
        std::vector<TokenId> ctx{1, 2};
        REQUIRE(cbow_loss(e, ctx, 3, {3, 3}) == Approx(cbow_loss(e, ctx, 3, {})));
        REQUIRE(max_grad_rel_err(e, ctx, 3, {3, 5}) < 1e-5);
    }
    SECTION("single context token") {
        auto e = random_embeddings(8, 5, rng);
        REQUIRE(max_grad_rel_err(e, {6}, 2, {0, 1}) < 1e-5);
    }
    SECTION("loss is finite and positive at extreme scores") {
        auto e = random_embeddings(4, 3, rng);
        for (auto& v : e.vectors) v = 40.0;
        for (auto& v : e.context_vectors) v = 40.0;
        double loss = cbow_loss(e, {1}, 2, {3});
        REQUIRE(std::isfinite(loss));
        REQUIRE(loss > 0.0);
    }
    SECTION("empty context is an error") {
        auto e = random_embeddings(4, 3, rng);
        REQUIRE_THROWS(cbow_loss(e, {}, 1, {2}));
    }
}

TEST_CASE("unigram sampler follows count^{3/4}", "[cbow]") {
    // counts: token 2 appears 81 times, token 3 appears 16 times
    std::vector<std::vector<TokenId>> corpus;
    for (int i = 0; i < 81; ++i) corpus.push_back({2});
    for (int i = 0; i < 16; ++i) corpus.push_back({3});
    UnigramSampler sampler(corpus, 5);

    REQUIRE(sampler.weight(2) == Approx(27.0)); // 81^{3/4}
    REQUIRE(sampler.weight(3) == Approx(8.0));  // 16^{3/4}
    REQUIRE(sampler.weight(0) == 0.0);

    Rng rng(7);
    int n2 = 0, n3 = 0;
    for (int i = 0; i < 20000; ++i) {
        TokenId t = sampler.sample(rng);
        REQUIRE((t == 2 || t == 3)); // zero-count tokens never drawn
        (t == 2 ? n2 : n3)++;
    }
    const double ratio = static_cast<double>(n2) / n3;
    REQUIRE(ratio == Approx(27.0 / 8.0).epsilon(0.08));

    SECTION("deterministic under seed") {
        Rng a(11), b(11);
        for (int i = 0; i < 100; ++i) REQUIRE(sampler.sample(a) == sampler.sample(b));
    }
    SECTION("empty corpus is an error") {
        REQUIRE_THROWS(UnigramSampler({}, 5));
    }
}

TEST_CASE("cbow training separates planted co-occurrence", "[cbow]") {
    auto corpus = planted_corpus();
    CbowConfig cfg;
    cfg.dim = 8;
    cfg.window = 20;
    cfg.epochs = 40;
    cfg.negatives = 3;
    cfg.learning_rate = 0.05;
    cfg.seed = 3;
    auto result = train_cbow(corpus, 22, cfg);
    const auto& e = result.embeddings;

    const double paired = cosine(e, 2, 3);
    double baseline = 0.0;
    for (TokenId t = 14; t < 22; ++t) baseline += cosine(e, 2, t);
    baseline = (baseline + cosine(e, 2, 4)) / 9.0;
    INFO("cos(2,3)=" << paired << " baseline=" << baseline);
    REQUIRE(paired > baseline);
    REQUIRE(paired > 0.0);

    SECTION("epoch mean loss is non-increasing early on") {
        REQUIRE(result.stats.epoch_loss.size() == 40);
        for (int i = 0; i + 1 < 5; ++i)
            REQUIRE(result.stats.epoch_loss[i + 1] <=
                    result.stats.epoch_loss[i] * 1.01);
    }
    SECTION("every sentence position with context trains") {
        REQUIRE(result.stats.positions_per_epoch == 150 * (8 + 8));
        REQUIRE(result.stats.skipped_sentences == 0);
    }
}

TEST_CASE("cbow training edge cases", "[cbow]") {
    CbowConfig cfg;
    cfg.dim = 4;
    cfg.epochs = 3;
    cfg.seed = 9;

    SECTION("single-token sentences leave the matrices at initialization") {
        std::vector<std::vector<TokenId>> corpus{{2}, {3}, {4}};
        auto result = train_cbow(corpus, 6, cfg);
        auto init = init_embeddings(6, cfg.dim, cfg.seed);
        REQUIRE(result.embeddings.vectors == init.vectors);
        REQUIRE(result.embeddings.context_vectors == init.context_vectors);
        REQUIRE(result.stats.positions_per_epoch == 0);
        for (double l : result.stats.epoch_loss) REQUIRE(l == 0.0);
    }
    SECTION("empty sentences are skipped and counted") {
        std::vector<std::vector<TokenId>> corpus{{}, {2, 3}, {}, {4, 5}};
        auto result = train_cbow(corpus, 6, cfg);
        REQUIRE(result.stats.skipped_sentences == 2);
        REQUIRE(result.stats.positions_per_epoch == 4);
    }
    SECTION("identical seeds give bitwise-identical embeddings") {
        auto corpus = planted_corpus();
        auto r1 = train_cbow(corpus, 22, cfg);
        auto r2 = train_cbow(corpus, 22, cfg);
        REQUIRE(r1.embeddings.vectors == r2.embeddings.vectors);
        REQUIRE(r1.embeddings.context_vectors == r2.embeddings.context_vectors);
        cfg.seed = 10;
        auto r3 = train_cbow(corpus, 22, cfg);
        REQUIRE(r1.embeddings.vectors != r3.embeddings.vectors);
    }
    SECTION("token outside the vocabulary is an error") {
        std::vector<std::vector<TokenId>> corpus{{2, 99}};
        REQUIRE_THROWS(train_cbow(corpus, 6, cfg));
    }
    SECTION("empty corpus is an error") {
        REQUIRE_THROWS(train_cbow({}, 6, cfg));
    }
    SECTION("initialization range scales with dim") {
        auto e = init_embeddings(10, 4, 1);
        for (double v : e.vectors) {
            REQUIRE(v >= -0.5 / 4);
            REQUIRE(v <= 0.5 / 4);
        }
        for (double v : e.context_vectors) REQUIRE(v == 0.0);
    }
}

TEST_CASE("cosine similarity basics", "[cbow]") {
    EmbeddingMatrix e;
    e.vocab_size = 4;
    e.dim = 3;
    e.vectors = {
        1.0, 0.0, 0.0, // token 0
        0.0, 2.0, 0.0, // token 1: orthogonal to 0
        3.0, 0.0, 0.0, // token 2: parallel to 0
        0.0, 0.0, 0.0, // token 3: zero vector
    };
    e.context_vectors.assign(e.vectors.size(), 0.0);

    REQUIRE(cosine(e, 0, 0) == Approx(1.0));
    REQUIRE(cosine(e, 0, 1) == Approx(0.0).margin(1e-15));
    REQUIRE(cosine(e, 0, 2) == Approx(1.0));
    REQUIRE(cosine(e, 1, 0) == cosine(e, 0, 1));
    REQUIRE_THROWS(cosine(e, 0, 3));
    REQUIRE_THROWS(cosine(e, 0, 9));
}

TEST_CASE("embedding file round trip", "[cbow]") {
    struct TempDir {
        fs::path path;
        TempDir() {
            path = fs::temp_directory_path() /
                   ("tracksort_cbow_test_" + std::to_string(::getpid()));
            fs::create_directories(path);
        }
        ~TempDir() {
            std::error_code ec;
            fs::remove_all(path, ec);
        }
    } dir;

    Rng rng(5);
    auto e = random_embeddings(7, 5, rng);
    auto path = dir.path / "embed.bin";
    save_embeddings(path, e);

    SECTION("values survive up to f32 rounding") {
        auto back = load_embeddings(path);
        REQUIRE(back.vocab_size == 7);
        REQUIRE(back.dim == 5);
        REQUIRE(back.vectors.size() == e.vectors.size());
        for (std::size_t i = 0; i < e.vectors.size(); ++i)
            REQUIRE(back.vectors[i] == static_cast<double>(static_cast<float>(e.vectors[i])));
        for (double v : back.context_vectors) REQUIRE(v == 0.0);
    }
    SECTION("header layout is magic, version, vocab, dim") {
        std::ifstream in(path, std::ios::binary);
        char magic[4];
        in.read(magic, 4);
        REQUIRE(std::string(magic, 4) == "CBOW");
        REQUIRE(io::read_u32(in) == 1);
        REQUIRE(io::read_u32(in) == 7);
        REQUIRE(io::read_u32(in) == 5);
        REQUIRE(fs::file_size(path) == 16 + 7 * 5 * 4);
    }
    SECTION("bad magic is rejected") {
        auto bad = dir.path / "bad.bin";
        std::ofstream out(bad, std::ios::binary);
        out << "XBOW1234567890123456";
        out.close();
        REQUIRE_THROWS(load_embeddings(bad));
    }
    SECTION("truncated file is rejected") {
        auto trunc = dir.path / "trunc.bin";
        fs::copy_file(path, trunc);
        fs::resize_file(trunc, fs::file_size(path) - 6);
        REQUIRE_THROWS(load_embeddings(trunc));
    }
    SECTION("saving twice produces byte-identical files") {
        auto path2 = dir.path / "embed2.bin";
        save_embeddings(path2, e);
        std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        REQUIRE(sa == sb);
    }
}
