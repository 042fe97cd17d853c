#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "carinox/autodiff.hpp"
#include "carinox/errors.hpp"
#include "carinox/linalg.hpp"
#include "carinox/rng.hpp"

namespace carinox::gen {

using NoiseVector = Vec;

enum class Category { kColor, kSpatial, kNumeracy, kComplex };

inline const char* category_name(Category c) {
  switch (c) {
    case Category::kColor: return "color";
    case Category::kSpatial: return "spatial";
    case Category::kNumeracy: return "numeracy";
    case Category::kComplex: return "complex";
  }
  return "?";
}

inline Category category_from_name(const std::string& s) {
  if (s == "color") return Category::kColor;
  if (s == "spatial") return Category::kSpatial;
  if (s == "numeracy") return Category::kNumeracy;
  if (s == "complex") return Category::kComplex;
  throw config_error("unknown category: " + s);
}

enum class RelationKind { kLeftOf, kAbove };

struct ObjectSpec {
  Vec target_color;  // RGB in [0,1]^3
};

struct RelationSpec {
  std::size_t subject = 0;
  std::size_t object = 0;
  RelationKind kind = RelationKind::kLeftOf;
};

struct PromptSpec {
  std::string id;
  Category category = Category::kColor;
  std::vector<ObjectSpec> objects;
  std::optional<RelationSpec> relation;
  std::size_t count_target = 0;
  Vec target_embedding;  // unit norm, embed_dim entries
};

// Node handles into the tape that generate() recorded on; what reward
// recording needs to differentiate through the scene.
struct SceneNodes {
  ad::NodeId eps = ad::kNoNode;
  ad::NodeId presence = ad::kNoNode;       // K entries
  ad::NodeId colors = ad::kNoNode;         // 3K entries, slot-major
  ad::NodeId positions = ad::kNoNode;      // 2K entries, (x, y) per slot
  ad::NodeId embedding_raw = ad::kNoNode;  // embed_dim entries, unnormalized
};

struct Scene {
  struct Slot {
    double presence = 0.0;  // in (0, 1)
    Vec color;              // 3 entries in (0, 1)
    Vec position;           // 2 entries in (-1, 1)
  };
  std::vector<Slot> slots;
  Vec embedding;  // unit norm in slot mode; the raw noise in identity mode
  SceneNodes nodes;
};

enum class GeneratorMode { kSlots, kIdentity };

struct GeneratorParams {
  GeneratorMode mode = GeneratorMode::kSlots;
  std::size_t d = 0;          // noise dimension
  std::size_t slots = 0;      // K
  std::size_t embed_dim = 0;
  std::uint64_t init_seed = 0;

  std::shared_ptr<const Mat> w;  // out_dim x d, out_dim = 6K
  Vec b;                         // out_dim
  std::shared_ptr<const Mat> e;  // embed_dim x 6K, slot-feature columns

  // Fixed 0/1 selectors derived from K; rebuilt after deserialization.
  std::shared_ptr<const Mat> sel_presence;  // K x 6K
  std::shared_ptr<const Mat> sel_color;     // 3K x 6K
  std::shared_ptr<const Mat> sel_position;  // 2K x 6K
  // Column blocks of E matching the squashed feature groups.
  std::shared_ptr<const Mat> e_presence;  // embed_dim x K
  std::shared_ptr<const Mat> e_color;     // embed_dim x 3K
  std::shared_ptr<const Mat> e_position;  // embed_dim x 2K

  std::size_t out_dim() const { return slots * 6; }
};

namespace detail {

// Slot k owns rows [6k, 6k+6): presence, r, g, b, x, y.
inline void derive_selectors(GeneratorParams& p) {
  const std::size_t k = p.slots;
  auto sp = std::make_shared<Mat>(k, 6 * k);
  auto sc = std::make_shared<Mat>(3 * k, 6 * k);
  auto sx = std::make_shared<Mat>(2 * k, 6 * k);
  for (std::size_t s = 0; s < k; ++s) {
    sp->at(s, 6 * s) = 1.0;
    for (std::size_t j = 0; j < 3; ++j) sc->at(3 * s + j, 6 * s + 1 + j) = 1.0;
    for (std::size_t j = 0; j < 2; ++j) sx->at(2 * s + j, 6 * s + 4 + j) = 1.0;
  }
  p.sel_presence = std::move(sp);
  p.sel_color = std::move(sc);
  p.sel_position = std::move(sx);

  auto ep = std::make_shared<Mat>(p.embed_dim, k);
  auto ec = std::make_shared<Mat>(p.embed_dim, 3 * k);
  auto ex = std::make_shared<Mat>(p.embed_dim, 2 * k);
  for (std::size_t r = 0; r < p.embed_dim; ++r) {
    for (std::size_t s = 0; s < k; ++s) {
      ep->at(r, s) = p.e->at(r, 6 * s);
      for (std::size_t j = 0; j < 3; ++j)
        ec->at(r, 3 * s + j) = p.e->at(r, 6 * s + 1 + j);
      for (std::size_t j = 0; j < 2; ++j)
        ex->at(r, 2 * s + j) = p.e->at(r, 6 * s + 4 + j);
    }
  }
  p.e_presence = std::move(ep);
  p.e_color = std::move(ec);
  p.e_position = std::move(ex);
}

}  // namespace detail

inline GeneratorParams init_generator(std::uint64_t seed, std::size_t d,
                                      std::size_t k, std::size_t embed_dim) {
  if (d < 2) throw config_error("init_generator: d must be >= 2");
  if (k < 1) throw config_error("init_generator: slot count must be >= 1");
  if (embed_dim < 2)
    throw config_error("init_generator: embed_dim must be >= 2");

  GeneratorParams p;
  p.mode = GeneratorMode::kSlots;
  p.d = d;
  p.slots = k;
  p.embed_dim = embed_dim;
  p.init_seed = seed;

  RandomStream rng(seed);
  const double sd = 1.0 / std::sqrt(double(d));
  auto w = std::make_shared<Mat>(p.out_dim(), d);
  for (double& v : w->data) v = sd * rng.normal();
  auto e = std::make_shared<Mat>(embed_dim, p.out_dim());
  for (double& v : e->data) v = sd * rng.normal();
  p.w = std::move(w);
  p.e = std::move(e);
  p.b = Vec(p.out_dim(), 0.0);
  detail::derive_selectors(p);
  return p;
}

// Analytic mode: the scene is the noise vector itself. Used for closed-form
// optimizer tests and the rugged-landscape scenario.
inline GeneratorParams make_identity_generator(std::size_t d) {
  if (d < 1) throw config_error("make_identity_generator: d must be >= 1");
  GeneratorParams p;
  p.mode = GeneratorMode::kIdentity;
  p.d = d;
  p.slots = 0;
  p.embed_dim = d;
  return p;
}

inline void validate_prompt(const PromptSpec& prompt, std::size_t slots,
                            std::size_t embed_dim) {
  for (const auto& o : prompt.objects) {
    if (o.target_color.size() != 3)
      throw contract_error("prompt: target_color must have 3 components");
    for (double c : o.target_color)
      if (!(c >= 0.0 && c <= 1.0))
        throw contract_error("prompt: target_color outside [0,1]");
  }
  if (prompt.relation) {
    const auto& r = *prompt.relation;
    if (r.subject >= prompt.objects.size() ||
        r.object >= prompt.objects.size())
      throw contract_error("prompt: relation references missing object");
    if (r.subject == r.object)
      throw contract_error("prompt: relation needs two distinct objects");
  }
  if (prompt.count_target > slots)
    throw contract_error("prompt: count_target exceeds slot count");
  if (!prompt.target_embedding.empty()) {
    if (prompt.target_embedding.size() != embed_dim)
      throw contract_error("prompt: target_embedding has wrong dimension");
    const double n = norm2(prompt.target_embedding);
    if (std::abs(n - 1.0) > 1e-9)
      throw contract_error("prompt: target_embedding must be unit-norm");
  }
}

// Decode noise into a scene, recording every step on the tape. The prompt is
// validated but does not influence the slots; all prompt alignment pressure
// comes from the rewards.
inline Scene generate(const GeneratorParams& params, const NoiseVector& noise,
                      const PromptSpec& prompt, ad::Tape& tape) {
  if (noise.size() != params.d)
    throw contract_error("generate: noise has dimension " +
                         std::to_string(noise.size()) + ", generator expects " +
                         std::to_string(params.d));
  if (!all_finite(noise))
    throw numeric_error("generate: non-finite noise");

  Scene scene;
  scene.nodes.eps = tape.leaf(noise);

  if (params.mode == GeneratorMode::kIdentity) {
    scene.embedding = noise;
    // No slots to count against in this mode.
    validate_prompt(prompt, std::numeric_limits<std::size_t>::max(),
                    params.embed_dim);
    return scene;
  }
  validate_prompt(prompt, params.slots, params.embed_dim);

  const ad::NodeId h = tape.affine(params.w, params.b, scene.nodes.eps);
  scene.nodes.presence =
      tape.sigmoid(tape.affine(params.sel_presence, {}, h));
  scene.nodes.colors = tape.sigmoid(tape.affine(params.sel_color, {}, h));
  scene.nodes.positions = tape.tanh(tape.affine(params.sel_position, {}, h));
  scene.nodes.embedding_raw = tape.add(
      tape.add(tape.affine(params.e_presence, {}, scene.nodes.presence),
               tape.affine(params.e_color, {}, scene.nodes.colors)),
      tape.affine(params.e_position, {}, scene.nodes.positions));

  const Vec& pres = tape.value(scene.nodes.presence);
  const Vec& cols = tape.value(scene.nodes.colors);
  const Vec& poss = tape.value(scene.nodes.positions);
  scene.slots.resize(params.slots);
  for (std::size_t s = 0; s < params.slots; ++s) {
    scene.slots[s].presence = pres[s];
    scene.slots[s].color = {cols[3 * s], cols[3 * s + 1], cols[3 * s + 2]};
    scene.slots[s].position = {poss[2 * s], poss[2 * s + 1]};
  }

  const Vec& raw = tape.value(scene.nodes.embedding_raw);
  const double n = norm2(raw);
  if (n == 0.0)
    throw singularity_error("generate: scene embedding collapsed to zero");
  scene.embedding = scaled(raw, 1.0 / n);
  return scene;
}

inline NoiseVector sample_noise(std::size_t d, RandomStream& rng) {
  if (d == 0) throw contract_error("sample_noise: zero dimension");
  return rng.normal_vec(d);
}

// JSON snapshot: sizes plus row-major matrices. Selectors are derived, so
// only W, b, E are stored.
inline nlohmann::json params_to_json(const GeneratorParams& p) {
  if (p.mode == GeneratorMode::kIdentity)
    return {{"mode", "identity"}, {"d", p.d}};
  return {{"mode", "slots"},
          {"d", p.d},
          {"slots", p.slots},
          {"embed_dim", p.embed_dim},
          {"init_seed", p.init_seed},
          {"w", p.w->data},
          {"b", p.b},
          {"e", p.e->data}};
}

inline GeneratorParams params_from_json(const nlohmann::json& j) {
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "identity")
    return make_identity_generator(j.at("d").get<std::size_t>());
  if (mode != "slots") throw parse_error("unknown generator mode: " + mode);
  GeneratorParams p;
  p.mode = GeneratorMode::kSlots;
  p.d = j.at("d").get<std::size_t>();
  p.slots = j.at("slots").get<std::size_t>();
  p.embed_dim = j.at("embed_dim").get<std::size_t>();
  p.init_seed = j.at("init_seed").get<std::uint64_t>();
  if (p.d < 2 || p.slots < 1 || p.embed_dim < 2)
    throw parse_error("generator params: invalid sizes");
  auto w = std::make_shared<Mat>(p.out_dim(), p.d);
  w->data = j.at("w").get<Vec>();
  if (w->data.size() != p.out_dim() * p.d)
    throw parse_error("generator params: W has wrong element count");
  auto e = std::make_shared<Mat>(p.embed_dim, p.out_dim());
  e->data = j.at("e").get<Vec>();
  if (e->data.size() != p.embed_dim * p.out_dim())
    throw parse_error("generator params: E has wrong element count");
  p.b = j.at("b").get<Vec>();
  if (p.b.size() != p.out_dim())
    throw parse_error("generator params: b has wrong element count");
  p.w = std::move(w);
  p.e = std::move(e);
  detail::derive_selectors(p);
  return p;
}

inline nlohmann::json prompt_to_json(const PromptSpec& p) {
  nlohmann::json j{{"id", p.id},
                   {"category", category_name(p.category)},
                   {"count_target", p.count_target},
                   {"target_embedding", p.target_embedding}};
  auto& objs = j["objects"] = nlohmann::json::array();
  for (const auto& o : p.objects) objs.push_back({{"color", o.target_color}});
  if (p.relation) {
    j["relation"] = {
        {"subject", p.relation->subject},
        {"object", p.relation->object},
        {"kind",
         p.relation->kind == RelationKind::kLeftOf ? "left_of" : "above"}};
  }
  return j;
}

inline PromptSpec prompt_from_json(const nlohmann::json& j) {
  PromptSpec p;
  p.id = j.value("id", std::string{});
  p.category = category_from_name(j.value("category", std::string{"color"}));
  p.count_target = j.at("count_target").get<std::size_t>();
  p.target_embedding = j.value("target_embedding", Vec{});
  for (const auto& o : j.at("objects"))
    p.objects.push_back({o.at("color").get<Vec>()});
  if (j.contains("relation")) {
    const auto& r = j.at("relation");
    RelationSpec rel;
    rel.subject = r.at("subject").get<std::size_t>();
    rel.object = r.at("object").get<std::size_t>();
    const std::string kind = r.at("kind").get<std::string>();
    if (kind == "left_of")
      rel.kind = RelationKind::kLeftOf;
    else if (kind == "above")
      rel.kind = RelationKind::kAbove;
    else
      throw parse_error("unknown relation kind: " + kind);
    p.relation = rel;
  }
  return p;
}

}  // namespace carinox::gen
