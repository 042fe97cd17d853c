#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "carinox/autodiff.hpp"
#include "carinox/errors.hpp"
#include "carinox/generator.hpp"
#include "carinox/linalg.hpp"

namespace carinox::rewards {

using gen::PromptSpec;
using gen::Scene;

enum class RewardKind { kAttribute, kSpatial, kCount, kEmbedding, kRugged };

inline const char* reward_kind_name(RewardKind k) {
  switch (k) {
    case RewardKind::kAttribute: return "attribute";
    case RewardKind::kSpatial: return "spatial";
    case RewardKind::kCount: return "count";
    case RewardKind::kEmbedding: return "embedding";
    case RewardKind::kRugged: return "rugged";
  }
  return "?";
}

inline RewardKind reward_kind_from_name(const std::string& s) {
  if (s == "attribute") return RewardKind::kAttribute;
  if (s == "spatial") return RewardKind::kSpatial;
  if (s == "count") return RewardKind::kCount;
  if (s == "embedding") return RewardKind::kEmbedding;
  if (s == "rugged") return RewardKind::kRugged;
  throw config_error("unknown reward kind: " + s);
}

struct Bump {
  Vec center;
  double height = 0.0;
  double width = 0.0;
};

struct RewardHyper {
  double sigma = 0.25;  // color-match bandwidth
  double beta = 10.0;   // soft-max temperature
  double kappa = 5.0;   // spatial margin sharpness
  std::vector<Bump> bumps;
};

struct RewardSpec {
  RewardKind kind = RewardKind::kAttribute;
  double lambda = 1.0;
  RewardHyper hyper;
};

struct RewardBreakdown {
  std::vector<std::pair<std::string, double>> per_reward;
  double total = 0.0;
};

// The logsumexp temperature that turns max over bumps into a smooth function.
inline constexpr double kRuggedSharpness = 50.0;

inline void validate_bumps(const std::vector<Bump>& bumps, std::size_t dim) {
  if (bumps.empty()) throw config_error("rugged landscape: no bumps");
  std::size_t globals = 0;
  for (const auto& b : bumps) {
    if (b.center.size() != dim)
      throw config_error("rugged landscape: bump center has dimension " +
                         std::to_string(b.center.size()) + ", expected " +
                         std::to_string(dim));
    if (!(b.width > 0.0)) throw config_error("rugged landscape: width <= 0");
    if (!std::isfinite(b.height))
      throw config_error("rugged landscape: non-finite height");
    if (b.height == 1.0)
      ++globals;
    else if (b.height > 0.6)
      throw config_error(
          "rugged landscape: local bump height must be <= 0.6, got " +
          std::to_string(b.height));
  }
  if (globals != 1)
    throw config_error("rugged landscape: need exactly one bump of height 1");
}

namespace detail {

inline void need_slots(const Scene& scene, const char* who) {
  if (scene.slots.empty())
    throw contract_error(std::string(who) + ": scene has no slots");
}

inline void check_attribute_args(const PromptSpec& prompt, double sigma,
                                 double beta) {
  if (!(sigma > 0.0)) throw config_error("attribute_reward: sigma must be > 0");
  if (!(beta > 0.0)) throw config_error("attribute_reward: beta must be > 0");
  if (prompt.objects.empty())
    throw contract_error("attribute_reward: prompt has no objects");
}

inline double color_dist2(const Vec& color, const Vec& target,
                          std::size_t slot) {
  double acc = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    const double dj = color[3 * slot + j] - target[j];
    acc += dj * dj;
  }
  return acc;
}

// Flattened per-slot values from a scene, matching the recorded layout.
struct FlatScene {
  Vec presence;   // K
  Vec colors;     // 3K
  Vec positions;  // 2K
};

inline FlatScene flatten(const Scene& scene) {
  FlatScene f;
  for (const auto& s : scene.slots) {
    f.presence.push_back(s.presence);
    f.colors.insert(f.colors.end(), s.color.begin(), s.color.end());
    f.positions.insert(f.positions.end(), s.position.begin(),
                       s.position.end());
  }
  return f;
}

inline Vec softmax(const Vec& z) {
  const double m = ad::detail::logsumexp_value(z);
  Vec w(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) w[i] = std::exp(z[i] - m);
  return w;
}

}  // namespace detail

// How well slots bind the prompt's target colors: per object o,
// m_k = presence_k * exp(-||color_k - c_o||^2 / sigma^2), scored by a
// normalized soft-max over slots and averaged over objects. Range (0, 1].
inline double attribute_reward(const Scene& scene, const PromptSpec& prompt,
                               double sigma, double beta) {
  detail::check_attribute_args(prompt, sigma, beta);
  detail::need_slots(scene, "attribute_reward");
  const auto f = detail::flatten(scene);
  const std::size_t k = scene.slots.size();
  const double denom = beta + std::log(double(k));
  double acc = 0.0;
  for (const auto& obj : prompt.objects) {
    Vec m(k);
    for (std::size_t s = 0; s < k; ++s)
      m[s] = f.presence[s] *
             std::exp(-detail::color_dist2(f.colors, obj.target_color, s) /
                      (sigma * sigma));
    Vec bm(k);
    for (std::size_t s = 0; s < k; ++s) bm[s] = beta * m[s];
    acc += ad::detail::logsumexp_value(bm) / denom;
  }
  return acc / double(prompt.objects.size());
}

// Soft spatial-relation check: each related object is soft-assigned to slots
// by color match, and the relation is scored by a sigmoid margin on the
// weighted mean coordinate. "above" compares on -y. Range (0, 1).
inline double spatial_reward(const Scene& scene, const PromptSpec& prompt,
                             double sigma, double kappa) {
  if (!(sigma > 0.0)) throw config_error("spatial_reward: sigma must be > 0");
  if (!(kappa > 0.0)) throw config_error("spatial_reward: kappa must be > 0");
  if (!prompt.relation)
    throw contract_error("spatial_reward: prompt has no relation");
  detail::need_slots(scene, "spatial_reward");
  const auto f = detail::flatten(scene);
  const std::size_t k = scene.slots.size();
  const auto& rel = *prompt.relation;
  const bool horizontal = rel.kind == gen::RelationKind::kLeftOf;

  auto soft_coord = [&](std::size_t obj_index) {
    const Vec& target = prompt.objects.at(obj_index).target_color;
    Vec z(k);
    for (std::size_t s = 0; s < k; ++s)
      z[s] = -detail::color_dist2(f.colors, target, s) / (sigma * sigma);
    const Vec w = detail::softmax(z);
    double acc = 0.0;
    for (std::size_t s = 0; s < k; ++s)
      acc += w[s] * f.positions[2 * s + (horizontal ? 0 : 1)];
    return acc;
  };

  const double subj = soft_coord(rel.subject);
  const double obj = soft_coord(rel.object);
  const double arg = horizontal ? (obj - subj) : (subj - obj);
  return ad::stable_sigmoid(kappa * arg);
}

// Soft count match: C = sum of presences, reward = exp(-(C - target)^2).
// Range (0, 1], equal to 1 iff C hits the target exactly.
inline double count_reward(const Scene& scene, const PromptSpec& prompt) {
  detail::need_slots(scene, "count_reward");
  double c = 0.0;
  for (const auto& s : scene.slots) c += s.presence;
  const double diff = c - double(prompt.count_target);
  return std::exp(-diff * diff);
}

// Global semantic match: (1 + cosine(scene embedding, target)) / 2 in [0, 1].
inline double embedding_reward(const Scene& scene, const PromptSpec& prompt) {
  if (prompt.target_embedding.empty())
    throw contract_error("embedding_reward: prompt has no target embedding");
  const double nt = norm2(prompt.target_embedding);
  if (std::abs(nt - 1.0) > 1e-9)
    throw contract_error("embedding_reward: target embedding must be unit-norm");
  if (scene.embedding.size() != prompt.target_embedding.size())
    throw contract_error("embedding_reward: embedding dimension mismatch");
  const double ns = norm2(scene.embedding);
  if (ns == 0.0)
    throw singularity_error("embedding_reward: zero scene embedding");
  return (1.0 + dot(scene.embedding, prompt.target_embedding) / (ns * nt)) /
         2.0;
}

// Smoothed max over Gaussian bumps: logsumexp at fixed sharpness stands in
// for max_j h_j * exp(-||eps - mu_j||^2 / w_j^2).
inline double rugged_reward(const Vec& eps, const std::vector<Bump>& bumps) {
  validate_bumps(bumps, eps.size());
  Vec a(bumps.size());
  for (std::size_t j = 0; j < bumps.size(); ++j) {
    const auto& b = bumps[j];
    double d2 = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const double di = eps[i] - b.center[i];
      d2 += di * di;
    }
    a[j] = kRuggedSharpness * b.height * std::exp(-d2 / (b.width * b.width));
  }
  return ad::detail::logsumexp_value(a) / kRuggedSharpness;
}

// Evaluates one spec against a value-level scene. Rugged rewards need the
// raw noise, which only the identity generator exposes as the scene itself.
inline double reward_value(const Scene& scene, const PromptSpec& prompt,
                           const RewardSpec& spec) {
  switch (spec.kind) {
    case RewardKind::kAttribute:
      return attribute_reward(scene, prompt, spec.hyper.sigma,
                              spec.hyper.beta);
    case RewardKind::kSpatial:
      return spatial_reward(scene, prompt, spec.hyper.sigma,
                            spec.hyper.kappa);
    case RewardKind::kCount:
      return count_reward(scene, prompt);
    case RewardKind::kEmbedding:
      return embedding_reward(scene, prompt);
    case RewardKind::kRugged:
      if (!scene.slots.empty())
        throw contract_error(
            "rugged reward outside the identity generator: no noise vector "
            "in a slot scene");
      return rugged_reward(scene.embedding, spec.hyper.bumps);
  }
  throw contract_error("reward_value: bad kind");
}

inline RewardBreakdown composite_reward(const Scene& scene,
                                        const PromptSpec& prompt,
                                        const std::vector<RewardSpec>& specs) {
  if (specs.empty()) throw contract_error("composite_reward: no specs");
  RewardBreakdown out;
  for (const auto& spec : specs) {
    if (!(spec.lambda >= 0.0))
      throw config_error("composite_reward: negative lambda");
    const double score = reward_value(scene, prompt, spec);
    out.per_reward.emplace_back(reward_kind_name(spec.kind), score);
    out.total += spec.lambda * score;
  }
  return out;
}

// A named, weighted, tape-recordable reward. The optimizer is generic over
// terms; the five built-in kinds are packaged below.
struct RewardTerm {
  std::string name;
  double lambda = 1.0;
  std::function<ad::NodeId(ad::Tape&, const Scene&)> record;
};

namespace detail {

inline std::shared_ptr<const Mat> block_sum_matrix(std::size_t k) {
  auto m = std::make_shared<Mat>(k, 3 * k);
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t j = 0; j < 3; ++j) m->at(s, 3 * s + j) = 1.0;
  return m;
}

inline std::shared_ptr<const Mat> coord_pick_matrix(std::size_t k,
                                                    std::size_t axis) {
  auto m = std::make_shared<Mat>(k, 2 * k);
  for (std::size_t s = 0; s < k; ++s) m->at(s, 2 * s + axis) = 1.0;
  return m;
}

inline std::shared_ptr<const Mat> ones_column(std::size_t k) {
  auto m = std::make_shared<Mat>(k, 1, 1.0);
  return m;
}

inline Vec tile3(const Vec& rgb, std::size_t k) {
  Vec t(3 * k);
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t j = 0; j < 3; ++j) t[3 * s + j] = rgb[j];
  return t;
}

inline void need_slot_nodes(const Scene& scene, const char* who) {
  need_slots(scene, who);
  if (scene.nodes.presence == ad::kNoNode)
    throw contract_error(std::string(who) +
                         ": scene was not recorded on a tape");
}

// Per-slot squared color distance to a fixed target, as a K-vector node.
inline ad::NodeId record_color_dist2(ad::Tape& tape, const Scene& scene,
                                     const Vec& target,
                                     const std::shared_ptr<const Mat>& bsum) {
  const std::size_t k = scene.slots.size();
  const ad::NodeId tiled = tape.constant(tile3(target, k));
  return tape.affine(bsum, {},
                     tape.square(tape.sub(scene.nodes.colors, tiled)));
}

}  // namespace detail

inline ad::NodeId record_attribute_reward(ad::Tape& tape, const Scene& scene,
                                          const PromptSpec& prompt,
                                          double sigma, double beta) {
  detail::check_attribute_args(prompt, sigma, beta);
  detail::need_slot_nodes(scene, "attribute_reward");
  const std::size_t k = scene.slots.size();
  const auto bsum = detail::block_sum_matrix(k);
  const double denom = beta + std::log(double(k));
  ad::NodeId acc = ad::kNoNode;
  for (const auto& obj : prompt.objects) {
    const ad::NodeId d2 =
        detail::record_color_dist2(tape, scene, obj.target_color, bsum);
    const ad::NodeId m = tape.mul(
        scene.nodes.presence, tape.exp(tape.scale(-1.0 / (sigma * sigma), d2)));
    const ad::NodeId s =
        tape.scale(1.0 / denom, tape.logsumexp(tape.scale(beta, m)));
    acc = acc == ad::kNoNode ? s : tape.add(acc, s);
  }
  return tape.scale(1.0 / double(prompt.objects.size()), acc);
}

inline ad::NodeId record_spatial_reward(ad::Tape& tape, const Scene& scene,
                                        const PromptSpec& prompt, double sigma,
                                        double kappa) {
  if (!(sigma > 0.0)) throw config_error("spatial_reward: sigma must be > 0");
  if (!(kappa > 0.0)) throw config_error("spatial_reward: kappa must be > 0");
  if (!prompt.relation)
    throw contract_error("spatial_reward: prompt has no relation");
  detail::need_slot_nodes(scene, "spatial_reward");
  const std::size_t k = scene.slots.size();
  const auto& rel = *prompt.relation;
  const bool horizontal = rel.kind == gen::RelationKind::kLeftOf;
  const auto bsum = detail::block_sum_matrix(k);
  const auto pick = detail::coord_pick_matrix(k, horizontal ? 0 : 1);
  const auto ones = detail::ones_column(k);
  const ad::NodeId coords = tape.affine(pick, {}, scene.nodes.positions);

  auto soft_coord = [&](std::size_t obj_index) {
    const Vec& target = prompt.objects.at(obj_index).target_color;
    const ad::NodeId z = tape.scale(
        -1.0 / (sigma * sigma),
        detail::record_color_dist2(tape, scene, target, bsum));
    const ad::NodeId w =
        tape.exp(tape.sub(z, tape.affine(ones, {}, tape.logsumexp(z))));
    return tape.dot(w, coords);
  };

  const ad::NodeId subj = soft_coord(rel.subject);
  const ad::NodeId obj = soft_coord(rel.object);
  const ad::NodeId arg =
      horizontal ? tape.sub(obj, subj) : tape.sub(subj, obj);
  return tape.sigmoid(tape.scale(kappa, arg));
}

inline ad::NodeId record_count_reward(ad::Tape& tape, const Scene& scene,
                                      const PromptSpec& prompt) {
  detail::need_slot_nodes(scene, "count_reward");
  const ad::NodeId c = tape.sum(scene.nodes.presence);
  const ad::NodeId diff =
      tape.sub(c, tape.constant(double(prompt.count_target)));
  return tape.exp(tape.scale(-1.0, tape.square(diff)));
}

inline ad::NodeId record_embedding_reward(ad::Tape& tape, const Scene& scene,
                                          const PromptSpec& prompt) {
  if (prompt.target_embedding.empty())
    throw contract_error("embedding_reward: prompt has no target embedding");
  if (std::abs(norm2(prompt.target_embedding) - 1.0) > 1e-9)
    throw contract_error("embedding_reward: target embedding must be unit-norm");
  // Cosine is scale-invariant, so the unnormalized embedding (or the raw
  // noise in identity mode) gives the same score as the unit embedding.
  const ad::NodeId raw = scene.slots.empty() ? scene.nodes.eps
                                             : scene.nodes.embedding_raw;
  if (raw == ad::kNoNode)
    throw contract_error("embedding_reward: scene was not recorded on a tape");
  if (tape.value(raw).size() != prompt.target_embedding.size())
    throw contract_error("embedding_reward: embedding dimension mismatch");
  const ad::NodeId c = tape.cosine(raw, tape.constant(prompt.target_embedding));
  auto half = std::make_shared<Mat>(1, 1, 0.5);
  return tape.affine(half, Vec{0.5}, c);
}

inline ad::NodeId record_rugged_reward(ad::Tape& tape, const Scene& scene,
                                       const std::vector<Bump>& bumps) {
  if (scene.nodes.eps == ad::kNoNode)
    throw contract_error("rugged_reward: scene was not recorded on a tape");
  const Vec& eps = tape.value(scene.nodes.eps);
  validate_bumps(bumps, eps.size());
  const std::size_t j = bumps.size();
  const std::size_t d = eps.size();

  // ||eps - mu_j||^2 expanded as ||eps||^2 - 2 mu_j . eps + ||mu_j||^2 so the
  // whole bump bank is one affine map plus a broadcast of ||eps||^2.
  auto neg2mu = std::make_shared<Mat>(j, d);
  Vec c2(j);
  Vec inv_w2(j);
  Vec heights(j);
  for (std::size_t r = 0; r < j; ++r) {
    const auto& b = bumps[r];
    for (std::size_t i = 0; i < d; ++i) neg2mu->at(r, i) = -2.0 * b.center[i];
    c2[r] = dot(b.center, b.center);
    inv_w2[r] = -1.0 / (b.width * b.width);
    heights[r] = b.height;
  }
  const ad::NodeId s2 = tape.sum(tape.square(scene.nodes.eps));
  const ad::NodeId q =
      tape.add(tape.affine(neg2mu, std::move(c2), scene.nodes.eps),
               tape.affine(detail::ones_column(j), {}, s2));
  const ad::NodeId kern = tape.exp(tape.mul(q, tape.constant(inv_w2)));
  const ad::NodeId act = tape.mul(kern, tape.constant(heights));
  return tape.scale(1.0 / kRuggedSharpness,
                    tape.logsumexp(tape.scale(kRuggedSharpness, act)));
}

inline ad::NodeId record_reward(ad::Tape& tape, const Scene& scene,
                                const PromptSpec& prompt,
                                const RewardSpec& spec) {
  switch (spec.kind) {
    case RewardKind::kAttribute:
      return record_attribute_reward(tape, scene, prompt, spec.hyper.sigma,
                                     spec.hyper.beta);
    case RewardKind::kSpatial:
      return record_spatial_reward(tape, scene, prompt, spec.hyper.sigma,
                                   spec.hyper.kappa);
    case RewardKind::kCount:
      return record_count_reward(tape, scene, prompt);
    case RewardKind::kEmbedding:
      return record_embedding_reward(tape, scene, prompt);
    case RewardKind::kRugged:
      return record_rugged_reward(tape, scene, spec.hyper.bumps);
  }
  throw contract_error("record_reward: bad kind");
}

inline std::vector<RewardTerm> build_reward_terms(
    const PromptSpec& prompt, const std::vector<RewardSpec>& specs) {
  std::vector<RewardTerm> terms;
  terms.reserve(specs.size());
  for (const auto& spec : specs) {
    if (!(spec.lambda >= 0.0))
      throw config_error("build_reward_terms: negative lambda");
    terms.push_back(
        {reward_kind_name(spec.kind), spec.lambda,
         [prompt, spec](ad::Tape& tape, const Scene& scene) {
           return record_reward(tape, scene, prompt, spec);
         }});
  }
  return terms;
}

}  // namespace carinox::rewards
