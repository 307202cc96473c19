#include "causalspan/tagger.hpp"

#include <algorithm>

#include <json.hpp>

namespace causalspan {

using nn::Index;
using nn::Mat;
using nn::Vec;

TaggerModel make_tagger(const TaggerConfig& config, Rng& rng) {
  if (config.buckets <= 0 || config.dim <= 0)
    throw ValidationError("tagger needs positive bucket count and embedding dim");
  TaggerModel model;
  model.config = config;
  const int k = model.tag_count();
  nn::init_glorot(model.params.add("emb", config.buckets, config.dim), rng);
  nn::init_glorot(model.params.add("W", k, 3 * config.dim), rng);
  nn::init_glorot(model.params.add("b", k, 1, 1), rng);
  return model;
}

namespace {

std::vector<int> token_buckets(const TaggerModel& model, const std::vector<std::string>& tokens) {
  std::vector<int> buckets(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i)
    buckets[i] = nn::hash_bucket(tokens[i], model.config.buckets);
  return buckets;
}

// Window [i-2, i+2] clipped to the sentence.
std::pair<Index, Index> window_bounds(Index i, Index n) {
  return {std::max<Index>(0, i - 2), std::min<Index>(n, i + 3)};
}

}  // namespace

Mat contextual_embed(const TaggerModel& model, const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw ValidationError("cannot embed an empty token list");
  const int d = model.config.dim;
  const auto n = static_cast<Index>(tokens.size());
  const Mat& table = model.params.at("emb").value;

  Mat rows(n, d);
  const std::vector<int> buckets = token_buckets(model, tokens);
  for (Index i = 0; i < n; ++i) rows.row(i) = table.row(buckets[static_cast<size_t>(i)]);
  const Vec sentence_mean = nn::mean_pool(rows);

  Mat out(n, 3 * d);
  for (Index i = 0; i < n; ++i) {
    const auto [lo, hi] = window_bounds(i, n);
    out.row(i).segment(0, d) = rows.row(i);
    out.row(i).segment(d, d) = nn::mean_pool(rows.middleRows(lo, hi - lo)).transpose();
    out.row(i).segment(2 * d, d) = sentence_mean.transpose();
  }
  return out;
}

Mat tagger_forward(const TaggerModel& model, const std::vector<std::string>& tokens) {
  const Mat embedded = contextual_embed(model, tokens);
  const Mat& W = model.params.at("W").value;
  const Vec b = model.params.at("b").value.col(0);
  Mat out(embedded.rows(), W.rows());
  for (Index i = 0; i < embedded.rows(); ++i)
    out.row(i) = nn::softmax(nn::linear(W, embedded.row(i).transpose(), b)).transpose();
  return out;
}

double tagger_loss_and_grad(TaggerModel& model, const Example& example, int* n_tokens_out) {
  const TagSequence gold = encode(example, model.config.scheme);
  const int d = model.config.dim;
  const auto n = static_cast<Index>(example.tokens.size());
  const Mat embedded = contextual_embed(model, example.tokens);
  const Mat& W = model.params.at("W").value;
  const Vec b = model.params.at("b").value.col(0);

  Mat& dW = model.params.at("W").grad;
  Mat& db = model.params.at("b").grad;
  Mat dE = Mat::Zero(n, d);  // gradient w.r.t. the raw token embedding rows
  Vec dsent = Vec::Zero(d);

  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vec e_i = embedded.row(i).transpose();
    const Vec logits = nn::linear(W, e_i, b);
    const int target = tag_index(gold.tags[static_cast<size_t>(i)], model.config.scheme);
    auto [token_loss, dlogits] = nn::softmax_xent(logits, target);
    loss += token_loss;
    dW += dlogits * e_i.transpose();
    db.col(0) += dlogits;
    const Vec de = W.transpose() * dlogits;
    dE.row(i) += de.segment(0, d).transpose();
    const auto [lo, hi] = window_bounds(i, n);
    const double wlen = static_cast<double>(hi - lo);
    for (Index j = lo; j < hi; ++j) dE.row(j) += de.segment(d, d).transpose() / wlen;
    dsent += de.segment(2 * d, d);
  }
  dE.rowwise() += dsent.transpose() / static_cast<double>(n);

  Mat& demb = model.params.at("emb").grad;
  const std::vector<int> buckets = token_buckets(model, example.tokens);
  for (Index i = 0; i < n; ++i) demb.row(buckets[static_cast<size_t>(i)]) += dE.row(i);

  if (n_tokens_out) *n_tokens_out = static_cast<int>(n);
  return loss;
}

double tagger_train_epoch(TaggerModel& model, const std::vector<Example>& corpus, Rng& rng,
                          double lr) {
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  nn::AdamConfig adam;
  adam.lr = lr;
  double total_loss = 0.0;
  long total_tokens = 0;
  for (size_t idx : order) {
    int n_tokens = 0;
    total_loss += tagger_loss_and_grad(model, corpus[idx], &n_tokens);
    total_tokens += n_tokens;
    nn::adam_step(model.params, adam);
  }
  return total_tokens == 0 ? 0.0 : total_loss / static_cast<double>(total_tokens);
}

std::vector<RoleSpan> tagger_predict(const TaggerModel& model,
                                     const std::vector<std::string>& tokens) {
  if (tokens.empty()) return {};
  const Mat dist = tagger_forward(model, tokens);
  TagSequence seq;
  seq.scheme = model.config.scheme;
  seq.tags.reserve(tokens.size());
  for (Index i = 0; i < dist.rows(); ++i) {
    int best = 0;
    for (Index j = 1; j < dist.cols(); ++j)
      if (dist(i, j) > dist(i, best)) best = static_cast<int>(j);
    seq.tags.push_back(tag_from_index(best, model.config.scheme));
  }
  return decode(seq, DecodeMode::Lenient);
}

void save_tagger(const TaggerModel& model, const std::string& path) {
  nlohmann::ordered_json config;
  config["kind"] = "tagger";
  config["scheme"] = scheme_to_string(model.config.scheme);
  config["buckets"] = model.config.buckets;
  config["dim"] = model.config.dim;
  nn::save_model_file(path, model.params, config.dump());
}

TaggerModel load_tagger(const std::string& path) {
  nn::LoadedModel loaded = nn::load_model_file(path);
  const auto config = nlohmann::json::parse(loaded.config_json);
  if (!config.contains("kind") || config["kind"] != "tagger")
    throw ValidationError(path + ": not a tagger model file");
  TaggerModel model;
  model.config.scheme = scheme_from_string(config.at("scheme").get<std::string>());
  model.config.buckets = config.at("buckets").get<int>();
  model.config.dim = config.at("dim").get<int>();
  model.params = std::move(loaded.params);

  const int k = model.tag_count(), d = model.config.dim;
  auto expect = [&](const char* name, Index rows, Index cols) {
    const nn::Param& param = model.params.at(name);
    if (param.value.rows() != rows || param.value.cols() != cols)
      throw ValidationError(path + ": parameter '" + name + "' has the wrong shape");
  };
  expect("emb", model.config.buckets, d);
  expect("W", k, 3 * d);
  expect("b", k, 1);
  return model;
}

}  // namespace causalspan
