#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "mat/error.hpp"
#include "mat/model/checkpoint.hpp"
#include "mat/model/mat.hpp"
#include "mat/numerics/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/oracle.hpp"
#include "support/samples.hpp"

using namespace mat;
using namespace mat::testing;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mat_model_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

template <typename T>
std::vector<T> values_of(const BasicTensor<T>& t) {
  return std::vector<T>(t.data().begin(), t.data().end());
}

// Bias and gain tensors start at 0/1; perturb everything so no path is degenerate.
MATParams<double> random_mat(const MATConfig& cfg, std::uint64_t seed, double scale = 0.4) {
  auto p = make_mat_params<double>(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  p.visit([&](const std::string& name, Tensor64& t) {
    const bool gain = name.size() >= 5 && name.compare(name.size() - 5, 5, ".gain") == 0;
    for (auto& v : t.mutable_data()) v = (gain ? 1.0 : 0.0) + dist(rng);
  });
  return p;
}

}  // namespace

TEST_CASE("census is a pure function of the config") {
  auto cfg = tiny_config();
  CHECK(mat_census(cfg) == mat_census(cfg));
  auto a = init_mat_params<float>(cfg, 1);
  std::vector<TensorSpec> seen;
  std::set<std::string> names;
  a.visit([&](const std::string& n, Tensor& t) {
    seen.push_back({n, t.shape()});
    names.insert(n);
  });
  CHECK(seen == mat_census(cfg));
  CHECK(names.size() == seen.size());

  auto wider = cfg;
  wider.d_head = 16;
  CHECK(mat_census(wider) != mat_census(cfg));
  bool found = false;
  for (const auto& s : mat_census(wider))
    if (s.name == "enc0.txt.intra.mha.wo") {
      CHECK(s.shape == Shape{32, 8});
      found = true;
    }
  CHECK(found);

  auto bad = cfg;
  bad.heads = 3;
  CHECK_THROWS_AS(mat_census(bad), ConfigError);
}

TEST_CASE("initialisation is seeded and follows the layout rules") {
  auto cfg = tiny_config();
  auto a = init_mat_params<float>(cfg, 5);
  auto b = init_mat_params<float>(cfg, 5);
  auto c = init_mat_params<float>(cfg, 6);
  auto ta = a.tensors(), tb = b.tensors(), tc = c.tensors();
  bool differs = false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(values_of(ta[i]) == values_of(tb[i]));
    differs = differs || values_of(ta[i]) != values_of(tc[i]);
  }
  CHECK(differs);
  a.visit([](const std::string& name, Tensor& t) {
    if (name.ends_with(".gain")) {
      for (float v : t.data()) CHECK(v == 1.f);
    } else if (t.dim() == 1) {
      for (float v : t.data()) CHECK(v == 0.f);
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(t.extent(0) + t.extent(1)));
      for (float v : t.data()) CHECK(std::abs(v) <= limit);
    }
  });
}

TEST_CASE("positional encoding matches the sinusoid table") {
  auto pe = positional_encoding<double>(5, 6, 2);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t i = 0; i < 3; ++i) {
      const double angle = static_cast<double>(r + 2) / std::pow(10000.0, 2.0 * i / 6.0);
      CHECK(pe.at(r, 2 * i) == doctest::Approx(std::sin(angle)).epsilon(1e-14));
      CHECK(pe.at(r, 2 * i + 1) == doctest::Approx(std::cos(angle)).epsilon(1e-14));
    }
}

TEST_CASE("embed_modality: positional component, shift, shape, tag checks") {
  auto cfg = tiny_config();
  auto p = random_mat(cfg, 1);
  for (auto& v : p.embed_txt.bias.mutable_data()) v = 0.0;
  auto zero = embed_modality(Tensor64::zeros({4, 3}), Modality::text, p, cfg);
  auto pe = positional_encoding<double>(4, cfg.d_model);
  CHECK(values_of(zero) == values_of(pe));

  std::mt19937_64 rng(2);
  auto x = random_matrix<double>(rng, 7, 4);
  auto e0 = embed_modality(x, Modality::timeseries, p, cfg);
  auto e3 = embed_modality(x, Modality::timeseries, p, cfg, 3);
  CHECK(e0.shape() == Shape{7, 8});
  auto shift = sub(positional_encoding<double>(7, 8, 3), positional_encoding<double>(7, 8, 0));
  for (std::size_t i = 0; i < e0.size(); ++i) CHECK(e3[i] - e0[i] == doctest::Approx(shift[i]).epsilon(1e-12));

  CHECK_THROWS_AS(embed_modality(x, Modality::text, p, cfg), ConfigError);
  CHECK_THROWS_AS(embed_modality(Tensor64::zeros({2, 2}), Modality::target, p, cfg), ConfigError);
}

TEST_CASE("encoder shape trace with unequal lookbacks") {
  auto cfg = tiny_config();
  cfg.lookback_txt = 6;
  cfg.lookback_ts = 9;
  auto s = random_sample(cfg, 3);
  auto x_txt = to_tensor<double>(s.txt.values), x_ts = to_tensor<double>(s.ts.values);

  // Each inter-modal exchange hands a stream the other stream's query length.
  for (std::size_t layers : {1u, 2u, 3u}) {
    cfg.n_enc_layers = layers;
    auto p = random_mat(cfg, 4);
    AttentionRecord rec;
    auto enc = encode(x_txt, x_ts, p, cfg, {}, &rec);
    const bool odd = layers % 2 == 1;
    CHECK(enc.txt.shape() == Shape{odd ? 9u : 6u, 8});
    CHECK(enc.ts.shape() == Shape{odd ? 6u : 9u, 8});
    CHECK(rec.temporal.at({0, BlockKind::intra, Stream::text}).shape() == Shape{2, 6, 6});
    CHECK(rec.temporal.at({0, BlockKind::inter, Stream::text}).shape() == Shape{2, 9, 6});
    CHECK(rec.temporal.at({0, BlockKind::inter, Stream::timeseries}).shape() == Shape{2, 6, 9});
  }

  cfg.n_enc_layers = 0;
  auto p = random_mat(cfg, 5);
  auto enc = encode(x_txt, x_ts, p, cfg);
  auto fa = feature_level_attention(x_txt, p.feat_txt_enc);
  auto direct = embed_modality(fa.weighted, Modality::text, p, cfg);
  CHECK(values_of(enc.txt) == values_of(direct));
}

TEST_CASE("encoder symmetry: identical inputs and parameters on both streams") {
  auto cfg = tiny_config();
  cfg.d_txt = cfg.d_ts = 4;
  cfg.lookback_txt = cfg.lookback_ts = 5;
  cfg.n_enc_layers = 2;
  auto p = random_mat(cfg, 6);
  p.feat_txt_enc = p.feat_ts_enc;
  p.embed_txt = p.embed_ts;
  for (auto& layer : p.encoder) layer.txt = layer.ts;
  auto s = random_sample(cfg, 7);
  auto x = to_tensor<double>(s.ts.values);
  auto enc = encode(x, x, p, cfg);
  CHECK(values_of(enc.txt) == values_of(enc.ts));
}

TEST_CASE("decode: causal position 0, single step, composition oracle") {
  auto cfg = tiny_config();
  auto p = random_mat(cfg, 8);
  auto s = random_sample(cfg, 9);
  auto enc = encode(to_tensor<double>(s.txt.values), to_tensor<double>(s.ts.values), p, cfg);
  Tensor64 y(Shape{4, 1}, {0.1, -0.4, 0.7, 0.2});
  auto base = decode(y, enc, p, cfg);
  CHECK(base.shape() == Shape{4, 1});
  Tensor64 y2(Shape{4, 1}, {0.1, 3.0, -2.0, 5.0});
  CHECK(decode(y2, enc, p, cfg)[0] == base[0]);

  auto single = decode(Tensor64(Shape{1, 1}, {0.1}), enc, p, cfg);
  CHECK(single.shape() == Shape{1, 1});
  CHECK(single[0] == doctest::Approx(base[0]).epsilon(1e-12));

  // Step-by-step from the block primitives.
  auto x = add(linear(y, p.embed_target), positional_encoding<double>(4, cfg.d_model));
  const auto& d = p.decoder[0];
  auto masked = masked_self_block(x, d.masked).out;
  auto a = target_modal_block(masked, enc.txt, p.feat_txt_dec, d.target_txt).attention.values;
  auto b = target_modal_block(masked, enc.ts, p.feat_ts_dec, d.target_ts).attention.values;
  Mat u = row_layer_norm(plus(to_mat(masked), plus(to_mat(a), to_mat(b))), vec_row(d.fusion_norm.gain),
                         vec_row(d.fusion_norm.bias));
  Mat ff = plus_row(mm(relu(plus_row(mm(u, to_mat(d.ffn.w1)), vec_row(d.ffn.b1))), to_mat(d.ffn.w2)), vec_row(d.ffn.b2));
  Mat out = row_layer_norm(plus(u, ff), vec_row(d.ffn_norm.gain), vec_row(d.ffn_norm.bias));
  Mat pred = plus_row(mm(out, to_mat(p.head.weight)), vec_row(p.head.bias));
  CHECK(max_abs_diff(base, pred) < 1e-5);
}

TEST_CASE("forward: length, causality, teacher forcing meets autoregression at step 1") {
  auto cfg = tiny_config();
  auto pf = init_mat_params<float>(cfg, 10);
  auto s = random_sample(cfg, 11);
  auto tf = forward(s, pf, cfg, true);
  auto ar = forward(s, pf, cfg, false);
  CHECK(tf.shape() == Shape{3, 1});
  CHECK(ar.shape() == Shape{3, 1});
  CHECK(std::abs(tf[0] - ar[0]) < 1e-6);

  // Changing ground truth at step k' leaves teacher-forced predictions k <= k' untouched.
  for (std::size_t kp = 0; kp < cfg.horizon; ++kp) {
    auto s2 = s;
    s2.y_future[kp] += 2.5;
    auto tf2 = forward(s2, pf, cfg, true);
    for (std::size_t k = 0; k <= kp; ++k) CHECK(tf2[k] == tf[k]);
  }

  auto bad = s;
  bad.y_future.pop_back();
  CHECK_THROWS_AS(forward(bad, pf, cfg, true), DataError);
  bad = s;
  bad.txt.values = Matrix(3, 3);
  CHECK_THROWS_AS(forward(bad, pf, cfg, false), DataError);
}

TEST_CASE("end-to-end causality by finite differences on a tiny model") {
  auto cfg = tiny_config();
  auto p = random_mat(cfg, 12);
  auto s = random_sample(cfg, 13);
  auto enc = encode(to_tensor<double>(s.txt.values), to_tensor<double>(s.ts.values), p, cfg);
  const std::size_t c = cfg.decoder_context();
  // d yhat_k / d y_future[k'] for k' >= k must vanish; y_future[k'] sits at decoder row c + k'.
  std::vector<Tensor64> ps{column_tensor<double>(decoder_input(s, c, true))};
  ps[0].set_requires_grad(true);
  for (std::size_t k = 0; k < cfg.horizon; ++k) {
    auto loss = [&] { return sum(slice_rows(decode(ps[0], enc, p, cfg), c - 1 + k, c + k)); };
    CHECK(check_gradients(ps, loss).max_rel_err < 1e-4);
    ps[0].zero_grad();
    loss().backward();
    for (std::size_t row = c + k; row < ps[0].size(); ++row) CHECK(ps[0].grad()[row] == 0.0);
    NoGradGuard ng;
    for (std::size_t row = c + k; row < ps[0].size(); ++row) {
      auto values = ps[0].mutable_data();
      const double orig = values[row];
      values[row] = orig + 1e-3;
      const double up = loss().item();
      values[row] = orig - 1e-3;
      const double down = loss().item();
      values[row] = orig;
      CHECK(up == down);
    }
  }
}

TEST_CASE("autoregression: single step, determinism, manual unroll") {
  auto cfg = tiny_config();
  auto p = init_mat_params<float>(cfg, 14);
  auto s = random_sample(cfg, 15);
  auto enc = encode(to_tensor<float>(s.txt.values), to_tensor<float>(s.ts.values), p, cfg);
  auto seq = decoder_input(s, cfg.decoder_context(), false);

  auto one_cfg = cfg;
  one_cfg.horizon = 1;
  auto s1 = s;
  s1.y_future.resize(1);
  auto single = predict_autoregressive(s1, p, one_cfg);
  CHECK(single[0] == decode(column_tensor<float>(decoder_input(s1, 1, false)), enc, p, one_cfg).data().back());

  auto a = predict_autoregressive(s, p, cfg);
  auto b = predict_autoregressive(s, p, cfg);
  CHECK(values_of(a) == values_of(b));

  std::vector<float> manual;
  for (int step = 0; step < 3; ++step) {
    const float next = decode(column_tensor<float>(seq), enc, p, cfg).data().back();
    manual.push_back(next);
    seq.push_back(next);
  }
  CHECK(values_of(a) == manual);
}

TEST_CASE("attention export: census, normalization, paired run") {
  auto cfg = tiny_config();
  cfg.n_enc_layers = 2;
  auto p = init_mat_params<float>(cfg, 16);
  auto s = random_sample(cfg, 17);
  auto ex = export_attention(s, p, cfg);
  CHECK(ex.record.temporal.size() == cfg.n_enc_layers * 2 * 2 + cfg.n_dec_layers * 3);
  std::set<std::string> names;
  for (const auto& [key, w] : ex.record.temporal) names.insert(key.name());
  CHECK(names.count("enc0_intra_txt") == 1);
  CHECK(names.count("enc1_inter_ts") == 1);
  CHECK(names.count("dec0_masked") == 1);
  CHECK(names.count("dec0_target-txt") == 1);
  CHECK(names.count("dec0_target-ts") == 1);

  auto rows_ok = [](const Tensor& w) {
    const std::size_t len = w.extent(w.dim() - 1);
    for (std::size_t r = 0; r < w.size() / len; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) total += w[r * len + j];
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  };
  rows_ok(ex.record.feature_weights_txt);
  rows_ok(ex.record.feature_weights_ts);
  CHECK(ex.record.feature_weights_txt.shape() == Shape{4, 3});
  for (const auto& [key, w] : ex.record.temporal) rows_ok(w);
  // Final decoding step has context + horizon - 1 positions.
  CHECK(ex.record.temporal.at({0, BlockKind::masked, Stream::target}).shape() == Shape{2, 5, 5});

  auto plain = predict_autoregressive(s, p, cfg);
  CHECK(values_of(ex.prediction) == values_of(plain));
}

TEST_CASE("asynchronous lookbacks all run and yield horizon-length output") {
  auto cfg = tiny_config();
  cfg.n_enc_layers = 2;
  for (std::size_t lt : {3u, 6u, 9u})
    for (std::size_t ls : {3u, 6u, 9u}) {
      cfg.lookback_txt = lt;
      cfg.lookback_ts = ls;
      auto p = init_mat_params<float>(cfg, 18);
      auto s = random_sample(cfg, 19);
      CHECK(forward(s, p, cfg, true).shape() == Shape{3, 1});
      CHECK(forward(s, p, cfg, false).shape() == Shape{3, 1});
    }
}

TEST_CASE("end-to-end gradient check on a tiny model") {
  auto cfg = tiny_config();
  cfg.horizon = 2;
  auto p = random_mat(cfg, 20);
  auto s = random_sample(cfg, 21);
  auto params = p.tensors();
  for (auto& t : params) t.set_requires_grad(true);
  Tensor64 target(Shape{2, 1}, {s.y_future[0], s.y_future[1]});
  auto loss = [&] {
    auto err = sub(forward(s, p, cfg, true), target);
    return mean(mul(err, err));
  };
  auto res = check_gradients(params, loss);
  INFO("worst param ", res.worst_param, " index ", res.worst_index, " analytic ", res.worst_analytic, " numeric ",
       res.worst_numeric);
  CHECK(res.max_rel_err < 1e-4);
  std::size_t n = 0;
  for (auto& t : params) n += t.size();
  CHECK(res.coordinates == n);
}

TEST_CASE("checkpoint: bitwise round trip") {
  auto cfg = tiny_config();
  auto p = init_mat_params<float>(cfg, 22);
  const auto path = temp_path("roundtrip.bin");
  save_checkpoint(p, cfg, path, 22);
  auto loaded = load_checkpoint(path);
  CHECK(loaded.config == cfg);
  CHECK(loaded.seed == 22);
  auto a = p.tensors(), b = loaded.params.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].size() == b[i].size());
    CHECK(std::memcmp(a[i].data().data(), b[i].data().data(), a[i].size() * sizeof(float)) == 0);
  }
}

TEST_CASE("checkpoint: truncation, census and header errors are distinct") {
  auto cfg = tiny_config();
  auto p = init_mat_params<float>(cfg, 23);
  const auto path = temp_path("full.bin");
  save_checkpoint(p, cfg, path);
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const auto cut = temp_path("cut.bin");
  {
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  CHECK_THROWS_AS(load_checkpoint(cut), CheckpointTruncationError);
  {
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), 40);
  }
  CHECK_THROWS_AS(load_checkpoint(cut), CheckpointTruncationError);

  auto other = cfg;
  other.d_ff = 16;
  try {
    load_checkpoint(path, other);
    FAIL("expected a census error");
  } catch (const CheckpointCensusError& e) {
    CHECK(std::string(e.what()).find("enc0.txt.inter.ffn.w1") != std::string::npos);
  }

  const auto bad = temp_path("bad.bin");
  {
    std::ofstream out(bad, std::ios::binary);
    std::string corrupt = bytes;
    corrupt[0] = 'X';
    out << corrupt;
  }
  CHECK_THROWS_AS(load_checkpoint(bad), CheckpointHeaderError);
  {
    std::ofstream out(bad, std::ios::binary);
    std::string corrupt = bytes;
    corrupt.replace(corrupt.find("format_version 1"), 16, "format_version 9");
    out << corrupt;
  }
  CHECK_THROWS_AS(load_checkpoint(bad), CheckpointHeaderError);
  {
    std::ofstream out(bad, std::ios::binary);
    std::string corrupt = bytes;
    const auto pos = corrupt.find("\nend\n") + 5;
    const std::uint32_t nan_bits = 0x7FC00000u;
    for (int b = 0; b < 4; ++b) corrupt[pos + b] = static_cast<char>((nan_bits >> (8 * b)) & 0xFF);
    out << corrupt;
  }
  CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.bin")), CheckpointError);
}
