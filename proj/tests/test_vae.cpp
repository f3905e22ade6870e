#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "qclean/textenc.hpp"
#include "qclean/vae.hpp"
#include "support/oracles.hpp"

namespace {

using namespace qclean;
using namespace qclean::vae;
namespace qt = qclean::testing;

VaeConfig tiny_config(std::size_t o_w = 20) {
  VaeConfig c;
  c.d = 4;
  c.h_dim = 8;
  c.z_dim = 3;
  c.o_w = o_w;
  c.max_len = 8;
  return c;
}

bool bit_equal(const VaeParams& a, const VaeParams& b) {
  bool same = true;
  VaeParams::zip([&](const std::string&, const auto& x, const auto& y) { same = same && x == y; }, a, b);
  return same;
}

TEST(Encoder, ZeroWeightsGiveZeroState) {
  auto p = VaeParams::zeros(tiny_config());
  p.embedding.setRandom();
  auto h = encoder_forward(p, {1, 5, 7, 2});
  EXPECT_EQ(h, Eigen::VectorXd::Zero(8));
}

TEST(Encoder, SingleTokenWithTiedWeightsIsTwiceOneStep) {
  VaeConfig c;
  c.d = 2;
  c.h_dim = 2;
  c.z_dim = 1;
  c.o_w = 6;
  auto p = VaeParams::zeros(c);
  p.embedding.row(4) << 0.5, -1.0;
  GruWeights w = GruWeights::zeros(2, 2);
  w.w_z << 0.1, 0.2, -0.3, 0.4;
  w.w_r << 0.5, 0.0, 0.0, 0.5;
  w.w_n << 1.0, -1.0, 0.25, 0.75;
  w.b_z << 0.1, -0.1;
  w.b_n << 0.2, 0.0;
  p.enc_fwd = w;
  p.enc_bwd = w;
  // From a zero state, h' = (1 - z) * tanh(W_n x + b_n), z = sigmoid(W_z x + b_z).
  const double x0 = 0.5, x1 = -1.0;
  auto sig = [](double a) { return 1.0 / (1.0 + std::exp(-a)); };
  const double z0 = sig(0.1 * x0 + 0.2 * x1 + 0.1), z1 = sig(-0.3 * x0 + 0.4 * x1 - 0.1);
  const double n0 = std::tanh(1.0 * x0 - 1.0 * x1 + 0.2), n1 = std::tanh(0.25 * x0 + 0.75 * x1);
  auto h = encoder_forward(p, {4});
  EXPECT_NEAR(h(0), 2.0 * (1.0 - z0) * n0, 1e-15);
  EXPECT_NEAR(h(1), 2.0 * (1.0 - z1) * n1, 1e-15);
}

TEST(Encoder, ReversedInputWithTiedWeightsGivesSameState) {
  auto c = tiny_config();
  auto p = VaeParams::uniform(c, 7, 0.5);
  p.enc_bwd = p.enc_fwd;
  IdSeq ids{1, 5, 9, 13, 2};
  IdSeq rev(ids.rbegin(), ids.rend());
  EXPECT_TRUE(encoder_forward(p, ids).isApprox(encoder_forward(p, rev), 1e-14));
}

TEST(Encoder, RejectsOutOfRangeIds) {
  auto p = VaeParams::zeros(tiny_config());
  EXPECT_THROW(encoder_forward(p, {1, 20, 2}), Error);
  EXPECT_THROW(encoder_forward(p, {}), Error);
}

TEST(Latent, Reparameterization) {
  auto c = tiny_config();
  c.z_dim = 2;
  auto p = VaeParams::zeros(c);
  p.latent_b << 1.0, 0.0, 0.0, std::log(4.0);  // mu = (1, 0), logvar = (0, ln 4)
  Eigen::VectorXd h = Eigen::VectorXd::Zero(8);

  auto zero = latent(p, h, Eigen::Vector2d(0.0, 0.0));
  EXPECT_EQ(zero.z, zero.mu);

  auto mixed = latent(p, h, Eigen::Vector2d(2.0, -1.0));
  EXPECT_NEAR(mixed.z(0), 3.0, 1e-15);
  EXPECT_NEAR(mixed.z(1), -2.0, 1e-15);

  p.latent_b << 1.0, 0.0, 0.0, 0.0;
  auto unit = latent(p, h, Eigen::Vector2d(1.0, 1.0));
  EXPECT_NEAR(unit.z(0), unit.mu(0) + 1.0, 1e-15);
  EXPECT_NEAR(unit.z(1), unit.mu(1) + 1.0, 1e-15);
}

TEST(Decoder, SoftmaxRowsSumToOne) {
  auto c = tiny_config();
  auto p = VaeParams::uniform(c, 3, 2.0);
  auto logits = decoder_forward(p, Eigen::Vector3d(0.3, -2.0, 1.0), {1, 6, 7, 8, 2});
  ASSERT_EQ(logits.size(), 4u);
  for (const auto& l : logits) EXPECT_NEAR(softmax(l).sum(), 1.0, 1e-12);
}

TEST(Decoder, ZeroWeightsAreUniform) {
  auto c = tiny_config(20);
  auto p = VaeParams::zeros(c);
  IdSeq ids{1, 4, 5, 6, 2};
  auto logits = decoder_forward(p, Eigen::Vector3d::Zero(), ids);
  auto loss = elbo_loss(logits, ids, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
  EXPECT_EQ(loss.ce, std::log(20.0));
  EXPECT_NEAR(loss.ce, 2.9957, 5e-5);
  EXPECT_EQ(reconstruction_loss(p, ids), std::log(20.0));
}

TEST(Decoder, DeterministicLogits) {
  auto p = VaeParams::uniform(tiny_config(), 11, 0.3);
  Eigen::Vector3d z(0.1, 0.2, 0.3);
  IdSeq ids{1, 9, 10, 2};
  auto a = decoder_forward(p, z, ids);
  auto b = decoder_forward(p, z, ids);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Decoder, RequiresBosEos) {
  auto p = VaeParams::zeros(tiny_config());
  EXPECT_THROW(decoder_forward(p, Eigen::Vector3d::Zero(), {4, 5, 2}), Error);
  EXPECT_THROW(decoder_forward(p, Eigen::Vector3d::Zero(), {1, 5, 6}), Error);
}

TEST(Elbo, KlClosedForms) {
  EXPECT_EQ(kl_divergence(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)), 0.0);
  Eigen::VectorXd mu(1), lv(1);
  mu << 1.0;
  lv << 0.0;
  EXPECT_DOUBLE_EQ(kl_divergence(mu, lv), 0.5);
}

TEST(Elbo, PerfectLogitsGiveNearZeroCe) {
  IdSeq ids{1, 5, 6, 2};
  std::vector<Eigen::VectorXd> logits;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    Eigen::VectorXd l = Eigen::VectorXd::Constant(10, -50.0);
    l(ids[i]) = 50.0;
    logits.push_back(l);
  }
  auto loss = elbo_loss(logits, ids, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), 0.25);
  EXPECT_LT(loss.ce, 1e-40);
  EXPECT_GE(loss.ce, 0.0);
  EXPECT_EQ(loss.total, loss.ce + 0.25 * loss.kl);
}

TEST(Gradient, MatchesCentralDifferences) {
  auto c = tiny_config();
  auto p = VaeParams::uniform(c, 2024, 0.5);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  std::vector<IdSeq> batch{{1, 4, 9, 17, 2}, {1, 19, 2}, {1, 5, 5, 6, 7, 8, 3, 2}};
  std::vector<Eigen::VectorXd> noise;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    Eigen::VectorXd r(3);
    for (int j = 0; j < 3; ++j) r(j) = normal(rng);
    noise.push_back(r);
  }
  const double beta = 0.7;
  auto grad = VaeParams::zeros(c);
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k)
    total += loss_and_gradient(p, batch[k], noise[k], beta, grad, 1.0 / 3.0).total;

  double reference = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) reference += qt::reference_elbo(p, batch[k], noise[k], beta);
  EXPECT_NEAR(total, reference, 1e-12);

  auto results = qt::finite_difference_check(p, grad, batch, noise, beta);
  ASSERT_EQ(results.size(), 34u);
  for (const auto& r : results) {
    EXPECT_LT(r.max_rel_error, 1e-4) << r.tensor;
    EXPECT_GT(r.max_abs_analytic, 0.0) << r.tensor;
  }
}

std::vector<IdSeq> repeated_corpus(std::size_t n) { return std::vector<IdSeq>(n, IdSeq{1, 4, 5, 6, 7, 2}); }

TEST(Train, OverfitsRepeatedSentence) {
  auto c = tiny_config(10);
  c.h_dim = 16;
  c.epochs = 200;
  c.batch_size = 4;
  c.learning_rate = 1e-2;
  c.kl_anneal_steps = 100;
  auto result = train(repeated_corpus(8), c);
  ASSERT_EQ(result.trace.size(), 200u);
  EXPECT_LT(result.trace.back().mean_ce, 0.1);
  EXPECT_LT(result.trace.back().mean_total, result.trace.front().mean_total);
  EXPECT_TRUE(result.params.all_finite());
}

TEST(Train, SeedDeterminesParameters) {
  auto c = tiny_config();
  c.epochs = 3;
  c.batch_size = 2;
  std::vector<IdSeq> corpus{{1, 4, 5, 2}, {1, 6, 7, 8, 2}, {1, 9, 2}, {1, 10, 11, 12, 13, 2}, {1, 4, 9, 2}};
  auto a = train(corpus, c);
  auto b = train(corpus, c);
  EXPECT_TRUE(bit_equal(a.params, b.params));
  std::reverse(corpus.begin(), corpus.end());
  auto permuted = train(corpus, c);
  EXPECT_TRUE(bit_equal(a.params, permuted.params));
  c.seed += 1;
  auto other = train(corpus, c);
  EXPECT_FALSE(bit_equal(a.params, other.params));
}

TEST(Train, EmptyCorpusIsAnError) {
  try {
    train({}, tiny_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_corpus);
  }
}

TEST(Train, DivergenceAbortsWithStep) {
  auto c = tiny_config();
  c.learning_rate = 1e300;
  c.epochs = 5;
  try {
    train(repeated_corpus(4), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Score, TrainingSentencesBeatShuffles) {
  std::mt19937_64 rng(17);
  qt::TemplateCorpus gen;
  std::vector<std::string> sentences;
  for (int i = 0; i < 600; ++i) sentences.push_back(gen.sentence(rng));
  std::vector<TokenSeq> toks;
  for (const auto& s : sentences) toks.push_back(tokenize(s));
  auto vocab = build_vocab(toks, 1000, 1);
  VaeConfig c;
  c.d = 16;
  c.h_dim = 32;
  c.z_dim = 8;
  c.o_w = vocab.size();
  c.max_len = 12;
  c.epochs = 8;
  c.batch_size = 16;
  c.learning_rate = 5e-3;
  c.kl_anneal_steps = 200;
  std::vector<IdSeq> corpus;
  for (const auto& t : toks) corpus.push_back(encode(vocab, t, c.max_len));
  auto model = train(corpus, c);

  int wins = 0, trials = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    IdSeq original = corpus[i];
    IdSeq shuffled = original;
    std::shuffle(shuffled.begin() + 1, shuffled.end() - 1, rng);
    if (shuffled == original) continue;
    const double a = reconstruction_loss(model.params, original);
    const double b = reconstruction_loss(model.params, shuffled);
    EXPECT_GE(a, 0.0);
    EXPECT_EQ(a, reconstruction_loss(model.params, original));
    wins += a < b;
    ++trials;
  }
  ASSERT_GT(trials, 150);
  EXPECT_GE(static_cast<double>(wins) / trials, 0.95) << wins << "/" << trials;
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / ("qclean_ck_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const char* name) const { return (dir_ / name).string(); }

  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  auto vocab = build_vocab({{"a", "b"}, {"c"}}, 100, 1);
  auto c = tiny_config(vocab.size());
  c.seed = 99;
  auto p = VaeParams::uniform(c, 1, 0.3);
  save_checkpoint(p, c, vocab.content_hash(), path("m.qdva"));
  auto ck = load_checkpoint(path("m.qdva"), &vocab);
  EXPECT_EQ(ck.config, c);
  EXPECT_TRUE(bit_equal(ck.params, p));
  EXPECT_EQ(ck.vocab_hash, vocab.content_hash());

  std::ifstream in(path("m.qdva"), std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "QDVA");
}

TEST_F(CheckpointTest, TruncatedFileIsRejected) {
  auto vocab = build_vocab({{"a", "b"}}, 100, 1);
  auto c = tiny_config(vocab.size());
  save_checkpoint(VaeParams::zeros(c), c, vocab.content_hash(), path("m.qdva"));
  const auto size = std::filesystem::file_size(path("m.qdva"));
  for (auto cut : {size - 8, std::uintmax_t{40}, std::uintmax_t{6}}) {
    std::filesystem::copy_file(path("m.qdva"), path("t.qdva"), std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(path("t.qdva"), cut);
    try {
      load_checkpoint(path("t.qdva"));
      FAIL() << cut;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::io);
    }
  }
}

TEST_F(CheckpointTest, BadMagicAndVersion) {
  std::vector<char> bytes = serialize_checkpoint(VaeParams::zeros(tiny_config()), tiny_config(), 0);
  auto corrupt = bytes;
  corrupt[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(corrupt), Error);
  corrupt = bytes;
  corrupt[4] = 9;
  try {
    deserialize_checkpoint(corrupt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST_F(CheckpointTest, VocabularyMismatch) {
  auto vocab = build_vocab({{"a", "b"}}, 100, 1);
  auto other = build_vocab({{"a", "c"}}, 100, 1);
  auto c = tiny_config(vocab.size());
  save_checkpoint(VaeParams::zeros(c), c, vocab.content_hash(), path("m.qdva"));
  try {
    load_checkpoint(path("m.qdva"), &other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::model_mismatch);
    EXPECT_NE(std::string(e.what()).find("model/vocabulary mismatch"), std::string::npos);
  }
}

}  // namespace
