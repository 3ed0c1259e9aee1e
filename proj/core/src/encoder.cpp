#include "mtqa/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtqa/hash.hpp"
#include "mtqa/rng.hpp"

namespace mtqa {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kLnEps = 1e-5;

inline double gelu(double x) {
  const double c = 0.7978845608028653979;  // sqrt(2/pi)
  double u = c * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_grad(double x) {
  const double c = 0.7978845608028653979;
  double x2 = x * x;
  double t = std::tanh(c * (x + 0.044715 * x * x2));
  double du = c * (1.0 + 3.0 * 0.044715 * x2);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

/// y = g .* xhat + b rowwise; returns xhat and 1/sigma for the backward pass.
void layer_norm_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gain,
                        const Eigen::MatrixXd& bias, Eigen::MatrixXd& xhat,
                        Eigen::VectorXd& inv_sigma, Eigen::MatrixXd& y) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  xhat.resize(rows, cols);
  y.resize(rows, cols);
  inv_sigma.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + kLnEps);
    inv_sigma(r) = is;
    xhat.row(r) = (x.row(r).array() - mu) * is;
    y.row(r) = xhat.row(r).cwiseProduct(gain.row(0)) + bias.row(0);
  }
}

void layer_norm_backward(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& xhat,
                         const Eigen::VectorXd& inv_sigma, const Eigen::MatrixXd& gain,
                         Eigen::MatrixXd& dgain, Eigen::MatrixXd& dbias, Eigen::MatrixXd& dx) {
  const Eigen::Index rows = dy.rows(), cols = dy.cols();
  dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  dx.resize(rows, cols);
  const double inv_d = 1.0 / static_cast<double>(cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gain.row(0));
    double m1 = dxhat.sum() * inv_d;
    double m2 = dxhat.cwiseProduct(xhat.row(r)).sum() * inv_d;
    dx.row(r) =
        ((dxhat.array() - m1) - xhat.row(r).array() * m2).matrix() * inv_sigma(r);
  }
}

Eigen::MatrixXd randn(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, scale);
  return m;
}

}  // namespace

void EncoderConfig::validate() const {
  if (width <= 0 || layers < 0 || heads <= 0 || ffn <= 0 || max_len <= 0 || vocab <= 0)
    throw ModelError("encoder config has non-positive dimensions");
  if (width % heads != 0) throw ModelError("encoder width must be divisible by head count");
  if (rel_clip < 0) throw ModelError("rel_clip must be non-negative");
}

EncoderParams EncoderParams::init(const EncoderConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  EncoderParams p;
  p.config = config;
  const int d = config.width, f = config.ffn;
  p.tok_emb = randn(config.vocab, d, config.init_scale, rng);
  p.pos_emb = randn(config.max_len, d, config.init_scale, rng);
  p.seg_emb = randn(2, d, config.init_scale, rng);
  p.match_emb = randn(2, d, config.init_scale, rng);
  p.layers.resize(static_cast<size_t>(config.layers));
  for (auto& l : p.layers) {
    l.wq = randn(d, d, config.init_scale, rng);
    l.wk = randn(d, d, config.init_scale, rng);
    l.wv = randn(d, d, config.init_scale, rng);
    l.wo = randn(d, d, config.init_scale, rng);
    l.bq = Eigen::MatrixXd::Zero(1, d);
    l.bk = Eigen::MatrixXd::Zero(1, d);
    l.bv = Eigen::MatrixXd::Zero(1, d);
    l.bo = Eigen::MatrixXd::Zero(1, d);
    l.rel_bias = Eigen::MatrixXd::Zero(config.heads, 2 * config.rel_clip + 1);
    l.ln1_g = Eigen::MatrixXd::Ones(1, d);
    l.ln1_b = Eigen::MatrixXd::Zero(1, d);
    l.ln2_g = Eigen::MatrixXd::Ones(1, d);
    l.ln2_b = Eigen::MatrixXd::Zero(1, d);
    l.w1 = randn(d, f, config.init_scale, rng);
    l.c1 = Eigen::MatrixXd::Zero(1, f);
    l.w2 = randn(f, d, config.init_scale, rng);
    l.c2 = Eigen::MatrixXd::Zero(1, d);
  }
  p.lnf_g = Eigen::MatrixXd::Ones(1, d);
  p.lnf_b = Eigen::MatrixXd::Zero(1, d);
  p.w_out = randn(d, kNumTags, config.init_scale, rng);
  p.b_out = Eigen::MatrixXd::Zero(1, kNumTags);
  return p;
}

EncoderParams EncoderParams::zeros(const EncoderConfig& config) {
  config.validate();
  EncoderParams p;
  p.config = config;
  const int d = config.width, f = config.ffn;
  p.tok_emb = Eigen::MatrixXd::Zero(config.vocab, d);
  p.pos_emb = Eigen::MatrixXd::Zero(config.max_len, d);
  p.seg_emb = Eigen::MatrixXd::Zero(2, d);
  p.match_emb = Eigen::MatrixXd::Zero(2, d);
  p.layers.resize(static_cast<size_t>(config.layers));
  for (auto& l : p.layers) {
    l.wq = l.wk = l.wv = l.wo = Eigen::MatrixXd::Zero(d, d);
    l.bq = l.bk = l.bv = l.bo = Eigen::MatrixXd::Zero(1, d);
    l.rel_bias = Eigen::MatrixXd::Zero(config.heads, 2 * config.rel_clip + 1);
    l.ln1_g = l.ln1_b = l.ln2_g = l.ln2_b = Eigen::MatrixXd::Zero(1, d);
    l.w1 = Eigen::MatrixXd::Zero(d, f);
    l.c1 = Eigen::MatrixXd::Zero(1, f);
    l.w2 = Eigen::MatrixXd::Zero(f, d);
    l.c2 = Eigen::MatrixXd::Zero(1, d);
  }
  p.lnf_g = Eigen::MatrixXd::Zero(1, d);
  p.lnf_b = Eigen::MatrixXd::Zero(1, d);
  p.w_out = Eigen::MatrixXd::Zero(d, kNumTags);
  p.b_out = Eigen::MatrixXd::Zero(1, kNumTags);
  return p;
}

size_t EncoderParams::parameter_count() const {
  size_t n = 0;
  for_each_tensor(*this, [&](const std::string&, const Eigen::MatrixXd& m) {
    n += static_cast<size_t>(m.size());
  });
  return n;
}

void for_each_tensor(EncoderParams& params,
                     const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn) {
  fn("tok_emb", params.tok_emb);
  fn("pos_emb", params.pos_emb);
  fn("seg_emb", params.seg_emb);
  fn("match_emb", params.match_emb);
  for (size_t i = 0; i < params.layers.size(); ++i) {
    auto& l = params.layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    fn(p + "wq", l.wq);
    fn(p + "bq", l.bq);
    fn(p + "wk", l.wk);
    fn(p + "bk", l.bk);
    fn(p + "wv", l.wv);
    fn(p + "bv", l.bv);
    fn(p + "wo", l.wo);
    fn(p + "bo", l.bo);
    fn(p + "rel_bias", l.rel_bias);
    fn(p + "ln1_g", l.ln1_g);
    fn(p + "ln1_b", l.ln1_b);
    fn(p + "w1", l.w1);
    fn(p + "c1", l.c1);
    fn(p + "w2", l.w2);
    fn(p + "c2", l.c2);
    fn(p + "ln2_g", l.ln2_g);
    fn(p + "ln2_b", l.ln2_b);
  }
  fn("lnf_g", params.lnf_g);
  fn("lnf_b", params.lnf_b);
  fn("w_out", params.w_out);
  fn("b_out", params.b_out);
}

void for_each_tensor(const EncoderParams& params,
                     const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) {
  for_each_tensor(const_cast<EncoderParams&>(params),
                  [&](const std::string& name, Eigen::MatrixXd& m) {
                    fn(name, static_cast<const Eigen::MatrixXd&>(m));
                  });
}


namespace {

/// Lexical-overlap flags: 1 when a token's id also occurs in the other
/// segment. Ids 0..2 are the [CLS]/[SEP]/[UNK] reserved slots and never
/// match.
std::vector<int> overlap_flags(const std::vector<int>& ids, int context_start) {
  const int t_len = static_cast<int>(ids.size());
  std::vector<int> flags(static_cast<size_t>(t_len), 0);
  if (context_start <= 0 || context_start >= t_len) return flags;
  std::set<int> question_ids, context_ids;
  for (int t = 0; t < context_start; ++t)
    if (ids[static_cast<size_t>(t)] > 2) question_ids.insert(ids[static_cast<size_t>(t)]);
  for (int t = context_start; t < t_len; ++t)
    if (ids[static_cast<size_t>(t)] > 2) context_ids.insert(ids[static_cast<size_t>(t)]);
  for (int t = 0; t < t_len; ++t) {
    const auto& other = t < context_start ? context_ids : question_ids;
    flags[static_cast<size_t>(t)] = other.count(ids[static_cast<size_t>(t)]) ? 1 : 0;
  }
  return flags;
}

}  // namespace

Eigen::MatrixXd encoder_forward(const EncoderParams& params, const std::vector<int>& ids,
                                int context_start, ForwardCache* cache) {
  const auto& cfg = params.config;
  cfg.validate();
  const int t_len = static_cast<int>(ids.size());
  if (t_len == 0) throw ModelError("encoder_forward: empty input");
  if (t_len > cfg.max_len)
    throw ModelError("encoder_forward: length " + std::to_string(t_len) +
                     " exceeds position table " + std::to_string(cfg.max_len));
  for (int id : ids)
    if (id < 0 || id >= cfg.vocab)
      throw ModelError("encoder_forward: token id " + std::to_string(id) +
                       " outside vocabulary of " + std::to_string(cfg.vocab));

  const int d = cfg.width, h = cfg.heads, dh = d / h;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  if (context_start < 0 || context_start > t_len)
    throw ModelError("encoder_forward: context_start out of range");
  const std::vector<int> match = overlap_flags(ids, context_start);
  Eigen::MatrixXd x(t_len, d);
  for (int t = 0; t < t_len; ++t)
    x.row(t) = params.tok_emb.row(ids[static_cast<size_t>(t)]) + params.pos_emb.row(t) +
               params.seg_emb.row(t >= context_start && context_start > 0 ? 1 : 0) +
               params.match_emb.row(match[static_cast<size_t>(t)]);
  if (cache) {
    cache->x0 = x;
    cache->layers.assign(params.layers.size(), LayerCache{});
  }

  for (size_t li = 0; li < params.layers.size(); ++li) {
    const auto& l = params.layers[li];
    LayerCache* lc = cache ? &cache->layers[li] : nullptr;
    if (lc) lc->x_in = x;

    Eigen::MatrixXd a_hat, a_in;
    Eigen::VectorXd inv_sigma1;
    layer_norm_forward(x, l.ln1_g, l.ln1_b, a_hat, inv_sigma1, a_in);

    Eigen::MatrixXd q = (a_in * l.wq).rowwise() + l.bq.row(0);
    Eigen::MatrixXd k = (a_in * l.wk).rowwise() + l.bk.row(0);
    Eigen::MatrixXd v = (a_in * l.wv).rowwise() + l.bv.row(0);
    Eigen::MatrixXd attn_out(t_len, d);
    std::vector<Eigen::MatrixXd> attn(static_cast<size_t>(h));
    for (int hi = 0; hi < h; ++hi) {
      auto qh = q.middleCols(hi * dh, dh);
      auto kh = k.middleCols(hi * dh, dh);
      auto vh = v.middleCols(hi * dh, dh);
      Eigen::MatrixXd s = qh * kh.transpose() * scale;
      for (int r = 0; r < t_len; ++r)
        for (int c = 0; c < t_len; ++c)
          s(r, c) += l.rel_bias(hi, std::clamp(c - r, -cfg.rel_clip, cfg.rel_clip) +
                                        cfg.rel_clip);
      Eigen::MatrixXd p(t_len, t_len);
      for (int r = 0; r < t_len; ++r) {
        double mx = s.row(r).maxCoeff();
        Eigen::RowVectorXd e = (s.row(r).array() - mx).exp();
        p.row(r) = e / e.sum();
      }
      attn_out.middleCols(hi * dh, dh) = p * vh;
      attn[static_cast<size_t>(hi)] = std::move(p);
    }
    Eigen::MatrixXd x_mid = x + ((attn_out * l.wo).rowwise() + l.bo.row(0));

    Eigen::MatrixXd f_hat, f_in;
    Eigen::VectorXd inv_sigma2;
    layer_norm_forward(x_mid, l.ln2_g, l.ln2_b, f_hat, inv_sigma2, f_in);

    Eigen::MatrixXd z1 = (f_in * l.w1).rowwise() + l.c1.row(0);
    Eigen::MatrixXd g = z1.unaryExpr([](double val) { return gelu(val); });
    Eigen::MatrixXd x_out = x_mid + ((g * l.w2).rowwise() + l.c2.row(0));

    if (lc) {
      lc->a_hat = std::move(a_hat);
      lc->a_in = std::move(a_in);
      lc->inv_sigma1 = std::move(inv_sigma1);
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->attn = std::move(attn);
      lc->attn_out = std::move(attn_out);
      lc->x_mid = x_mid;
      lc->f_hat = std::move(f_hat);
      lc->f_in = std::move(f_in);
      lc->inv_sigma2 = std::move(inv_sigma2);
      lc->z1 = std::move(z1);
      lc->g = std::move(g);
      lc->x_out = x_out;
    }
    x = std::move(x_out);
  }

  Eigen::MatrixXd final_hat, final_out;
  Eigen::VectorXd inv_sigma_final;
  layer_norm_forward(x, params.lnf_g, params.lnf_b, final_hat, inv_sigma_final, final_out);
  Eigen::MatrixXd logits = (final_out * params.w_out).rowwise() + params.b_out.row(0);
  if (cache) {
    cache->final_hat = std::move(final_hat);
    cache->final_out = std::move(final_out);
    cache->inv_sigma_final = std::move(inv_sigma_final);
    cache->logits = logits;
  }
  return logits;
}

TagDistribution encode_and_tag(const EncoderParams& params, const ModelInput& input,
                               ForwardCache& cache) {
  Eigen::MatrixXd logits = encoder_forward(params, input.ids, input.context_offset, &cache);
  return TagDistribution::from_logits(
      logits.middleRows(input.context_offset, input.context_length));
}

TagDistribution encode_and_tag(const EncoderParams& params, const ModelInput& input) {
  Eigen::MatrixXd logits = encoder_forward(params, input.ids, input.context_offset, nullptr);
  return TagDistribution::from_logits(
      logits.middleRows(input.context_offset, input.context_length));
}

void encoder_backward(const EncoderParams& params, const std::vector<int>& ids,
                      int context_start, const ForwardCache& cache,
                      const Eigen::MatrixXd& dlogits, EncoderParams& grad) {
  const auto& cfg = params.config;
  const int t_len = static_cast<int>(ids.size());
  const int d = cfg.width, h = cfg.heads, dh = d / h;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (dlogits.rows() != t_len || dlogits.cols() != kNumTags)
    throw ModelError("encoder_backward: dlogits shape mismatch");

  grad.w_out += cache.final_out.transpose() * dlogits;
  grad.b_out.row(0) += dlogits.colwise().sum();
  Eigen::MatrixXd dfinal = dlogits * params.w_out.transpose();
  Eigen::MatrixXd dx;
  layer_norm_backward(dfinal, cache.final_hat, cache.inv_sigma_final, params.lnf_g, grad.lnf_g,
                      grad.lnf_b, dx);

  for (int li = static_cast<int>(params.layers.size()) - 1; li >= 0; --li) {
    const auto& l = params.layers[static_cast<size_t>(li)];
    const auto& lc = cache.layers[static_cast<size_t>(li)];
    auto& gl = grad.layers[static_cast<size_t>(li)];

    // x_out = x_mid + gelu(LN2(x_mid) w1 + c1) w2 + c2
    const Eigen::MatrixXd& df = dx;
    gl.w2 += lc.g.transpose() * df;
    gl.c2.row(0) += df.colwise().sum();
    Eigen::MatrixXd dg = df * l.w2.transpose();
    Eigen::MatrixXd dz1 =
        dg.array() * lc.z1.unaryExpr([](double v) { return gelu_grad(v); }).array();
    gl.w1 += lc.f_in.transpose() * dz1;
    gl.c1.row(0) += dz1.colwise().sum();
    Eigen::MatrixXd df_in = dz1 * l.w1.transpose();
    Eigen::MatrixXd dx_mid_ln;
    layer_norm_backward(df_in, lc.f_hat, lc.inv_sigma2, l.ln2_g, gl.ln2_g, gl.ln2_b, dx_mid_ln);
    Eigen::MatrixXd dx_mid = dx + dx_mid_ln;

    // x_mid = x_in + attention(LN1(x_in)) wo + bo
    gl.wo += lc.attn_out.transpose() * dx_mid;
    gl.bo.row(0) += dx_mid.colwise().sum();
    Eigen::MatrixXd dattn_out = dx_mid * l.wo.transpose();

    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(t_len, d);
    Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(t_len, d);
    Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(t_len, d);
    for (int hi = 0; hi < h; ++hi) {
      const auto& p = lc.attn[static_cast<size_t>(hi)];
      auto qh = lc.q.middleCols(hi * dh, dh);
      auto kh = lc.k.middleCols(hi * dh, dh);
      auto vh = lc.v.middleCols(hi * dh, dh);
      Eigen::MatrixXd do_h = dattn_out.middleCols(hi * dh, dh);
      Eigen::MatrixXd dp = do_h * vh.transpose();
      dv.middleCols(hi * dh, dh) += p.transpose() * do_h;
      Eigen::MatrixXd ds(t_len, t_len);
      for (int r = 0; r < t_len; ++r) {
        double dot = dp.row(r).cwiseProduct(p.row(r)).sum();
        ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
      }
      for (int r = 0; r < t_len; ++r)
        for (int c = 0; c < t_len; ++c)
          gl.rel_bias(hi, std::clamp(c - r, -cfg.rel_clip, cfg.rel_clip) + cfg.rel_clip) +=
              ds(r, c);
      dq.middleCols(hi * dh, dh) += ds * kh * scale;
      dk.middleCols(hi * dh, dh) += ds.transpose() * qh * scale;
    }
    gl.wq += lc.a_in.transpose() * dq;
    gl.bq.row(0) += dq.colwise().sum();
    gl.wk += lc.a_in.transpose() * dk;
    gl.bk.row(0) += dk.colwise().sum();
    gl.wv += lc.a_in.transpose() * dv;
    gl.bv.row(0) += dv.colwise().sum();
    Eigen::MatrixXd da_in =
        dq * l.wq.transpose() + dk * l.wk.transpose() + dv * l.wv.transpose();
    Eigen::MatrixXd dx_ln1;
    layer_norm_backward(da_in, lc.a_hat, lc.inv_sigma1, l.ln1_g, gl.ln1_g, gl.ln1_b, dx_ln1);
    dx = dx_mid + dx_ln1;
  }

  const std::vector<int> match = overlap_flags(ids, context_start);
  for (int t = 0; t < t_len; ++t) {
    grad.tok_emb.row(ids[static_cast<size_t>(t)]) += dx.row(t);
    grad.pos_emb.row(t) += dx.row(t);
    grad.seg_emb.row(t >= context_start && context_start > 0 ? 1 : 0) += dx.row(t);
    grad.match_emb.row(match[static_cast<size_t>(t)]) += dx.row(t);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

uint64_t schema_digest(const Schema& schema) { return fnv1a64(serialize_schema(schema)); }

namespace {

ordered_json tensor_to_json(const Eigen::MatrixXd& m) {
  ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      data[static_cast<size_t>(r * m.cols() + c)] = m(r, c);
  j["data"] = data;
  return j;
}

Eigen::MatrixXd tensor_from_json(const ordered_json& j) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ModelError("checkpoint tensor size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = data[static_cast<size_t>(r * cols + c)];
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  ordered_json j;
  j["format"] = "mtqa-checkpoint-v1";
  j["schema_hash"] = hex64(ckpt.schema_hash);
  j["config"] = ordered_json{{"width", ckpt.params.config.width},
                             {"layers", ckpt.params.config.layers},
                             {"heads", ckpt.params.config.heads},
                             {"ffn", ckpt.params.config.ffn},
                             {"max_len", ckpt.params.config.max_len},
                             {"vocab", ckpt.params.config.vocab},
                             {"rel_clip", ckpt.params.config.rel_clip}};
  j["decoding"] = ordered_json{{"strict", ckpt.decoding.strict}};
  j["question_mode"] = ckpt.question_mode;
  j["trained"] = ckpt.trained;
  j["vocabulary"] = ckpt.vocab.tokens();
  ordered_json tensors = ordered_json::object();
  for_each_tensor(ckpt.params, [&](const std::string& name, const Eigen::MatrixXd& m) {
    tensors[name] = tensor_to_json(m);
  });
  j["tensors"] = tensors;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write checkpoint: " + path);
  out << j.dump();
}

Checkpoint load_checkpoint(const std::string& path, const Schema* expected_schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open checkpoint: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("checkpoint parse failure: " + std::string(e.what()));
  }
  if (!j.contains("format") || j["format"] != "mtqa-checkpoint-v1")
    throw ModelError("not an mtqa checkpoint: " + path);

  Checkpoint ckpt;
  ckpt.schema_hash = parse_hex64(j.at("schema_hash").get<std::string>());
  if (expected_schema && ckpt.schema_hash != schema_digest(*expected_schema))
    throw ModelError("checkpoint schema hash does not match the provided schema");
  const auto& jc = j.at("config");
  ckpt.params.config.width = jc.at("width").get<int>();
  ckpt.params.config.layers = jc.at("layers").get<int>();
  ckpt.params.config.heads = jc.at("heads").get<int>();
  ckpt.params.config.ffn = jc.at("ffn").get<int>();
  ckpt.params.config.max_len = jc.at("max_len").get<int>();
  ckpt.params.config.vocab = jc.at("vocab").get<int>();
  ckpt.params.config.rel_clip = jc.value("rel_clip", 8);
  ckpt.decoding.strict = j.at("decoding").at("strict").get<bool>();
  ckpt.question_mode = j.at("question_mode").get<std::string>();
  ckpt.trained = j.value("trained", false);
  ckpt.vocab = Vocabulary::from_tokens(j.at("vocabulary").get<std::vector<std::string>>());
  if (ckpt.vocab.size() != ckpt.params.config.vocab)
    throw ModelError("checkpoint vocabulary size disagrees with config");

  ckpt.params = [&] {
    EncoderParams p = EncoderParams::zeros(ckpt.params.config);
    const auto& tensors = j.at("tensors");
    for_each_tensor(p, [&](const std::string& name, Eigen::MatrixXd& m) {
      if (!tensors.contains(name)) throw ModelError("checkpoint missing tensor '" + name + "'");
      Eigen::MatrixXd loaded = tensor_from_json(tensors[name]);
      if (loaded.rows() != m.rows() || loaded.cols() != m.cols())
        throw ModelError("checkpoint tensor '" + name + "' has the wrong shape");
      m = std::move(loaded);
    });
    return p;
  }();
  return ckpt;
}

}  // namespace mtqa
