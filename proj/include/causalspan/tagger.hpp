#pragma once

#include <string>
#include <vector>

#include "causalspan/corpus.hpp"
#include "causalspan/nn.hpp"
#include "causalspan/tagging.hpp"

namespace causalspan {

struct TaggerConfig {
  Scheme scheme = Scheme::Iobes;
  int buckets = 32768;  // hashed word buckets V
  int dim = 24;         // embedding dim d
};

/// Sequence tagger: per-token contextual embedding (token + local window mean
/// + sentence mean, 3d total) followed by a softmax label head over the tag
/// alphabet of the scheme.
struct TaggerModel {
  TaggerConfig config;
  nn::ParamSet params;  // "emb" [V x d], "W" [k x 3d], "b" [k]

  int tag_count() const { return tag_alphabet_size(config.scheme); }
};

TaggerModel make_tagger(const TaggerConfig& config, Rng& rng);

/// Row i is e_i = concat(emb(token_i), mean of emb over window [i-2, i+2]
/// clipped to bounds, mean of emb over the sentence); L x 3d.
nn::Mat contextual_embed(const TaggerModel& model, const std::vector<std::string>& tokens);

/// Per-token tag distributions, L x k; each row is softmax(W e_i + b).
nn::Mat tagger_forward(const TaggerModel& model, const std::vector<std::string>& tokens);

/// Summed per-token cross-entropy of the example against its encoded gold
/// tags, with gradients accumulated into the model. n_tokens_out, when given,
/// receives the token count.
double tagger_loss_and_grad(TaggerModel& model, const Example& example,
                            int* n_tokens_out = nullptr);

/// One pass over the corpus in rng-shuffled order with one Adam update per
/// example. Returns the mean per-token loss.
double tagger_train_epoch(TaggerModel& model, const std::vector<Example>& corpus, Rng& rng,
                          double lr);

/// Argmax tag per token (ties break toward the lower tag index), then lenient
/// decode. Total: never throws on any model output.
std::vector<RoleSpan> tagger_predict(const TaggerModel& model,
                                     const std::vector<std::string>& tokens);

void save_tagger(const TaggerModel& model, const std::string& path);
TaggerModel load_tagger(const std::string& path);

}  // namespace causalspan
