#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <limits>
#include <vector>

#include "fanlasso/rng.hpp"
#include "fanlasso/serialize.hpp"

using namespace fanlasso;

namespace {

Matrix runif_matrix(std::size_t n, std::size_t p, Rng& rng) {
  Matrix m(n, p);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

FastNnModel sample_fast_nn(Rng& rng, bool with_optionals) {
  FastNnModel m;
  m.projection.w = runif_matrix(11, 3, rng);
  m.projection.r_bar = 3;
  m.projection.source = CovarianceSource::Pooled;
  if (with_optionals) m.projection.delta_used = 0.4375;
  m.selection = make_selection_layer(11, 4, 0.01, 0.137, rng);
  if (with_optionals) m.selection.trunc_bound = 25.0;
  m.net = make_relu_network(7, 2, 5, 12.5, with_optionals ? 3.0 : std::numeric_limits<double>::infinity(), rng);
  return m;
}

FineTunedModel sample_finetuned(Rng& rng) {
  FineTunedModel m;
  m.source = sample_fast_nn(rng, true);
  m.target_projection.w = runif_matrix(11, 2, rng);
  m.target_projection.r_bar = 2;
  m.target_projection.source = CovarianceSource::Target;
  m.target_selection = make_selection_layer(11, 3, 0.02, 0.05, rng);
  m.target_net = make_relu_network(2 + 1 + 3, 1, 4, 9.0, 10.0, rng);
  return m;
}

}  // namespace

TEST_CASE("fast-nn bundle round trip is value and byte exact") {
  Rng rng(81u);
  for (bool with_optionals : {false, true}) {
    const FastNnModel m = sample_fast_nn(rng, with_optionals);
    BundleMeta meta;
    meta.seed = 123456789012345ull;
    meta.config_digest = "fe1d2c";
    const std::string text = serialize_model(m, meta);
    const LoadedModel loaded = parse_model(text);
    CHECK(loaded.kind == kKindFastNnSource);
    CHECK(loaded.meta == meta);
    REQUIRE(std::holds_alternative<FastNnModel>(loaded.model));
    CHECK(std::get<FastNnModel>(loaded.model) == m);
    CHECK(serialize_model(loaded) == text);
  }
}

TEST_CASE("fine-tuned bundle embeds the source bundle verbatim") {
  Rng rng(82u);
  const FineTunedModel m = sample_finetuned(rng);
  BundleMeta meta;
  meta.seed = 7u;
  meta.config_digest = "abc";
  BundleMeta source_meta;
  source_meta.seed = 99u;
  source_meta.config_digest = "def";
  const std::string text = serialize_model(m, meta, source_meta);
  const std::string source_text = serialize_model(m.source, source_meta);

  const nlohmann::json doc = nlohmann::json::parse(text);
  CHECK(doc.at("model").at("source_bundle").dump() == source_text);

  const LoadedModel loaded = parse_model(text);
  CHECK(loaded.kind == kKindFanLassoFineTuned);
  CHECK(loaded.meta == meta);
  CHECK(loaded.source_meta == source_meta);
  REQUIRE(std::holds_alternative<FineTunedModel>(loaded.model));
  CHECK(std::get<FineTunedModel>(loaded.model) == m);
  CHECK(serialize_model(loaded) == text);
}

TEST_CASE("vanilla bundles round trip") {
  Rng rng(83u);
  VanillaModel v;
  v.net = make_relu_network(9, 2, 6, 4.0, std::numeric_limits<double>::infinity(), rng);
  const std::string text = serialize_model(v);
  const LoadedModel loaded = parse_model(text);
  CHECK(loaded.kind == kKindVanillaSource);
  REQUIRE(std::holds_alternative<VanillaModel>(loaded.model));
  CHECK(std::get<VanillaModel>(loaded.model) == v);
  CHECK(std::get<VanillaModel>(loaded.model).net.weight_bound_t ==
        std::numeric_limits<double>::infinity());
  CHECK(serialize_model(loaded) == text);

  VanillaFineTunedModel ft;
  ft.source = v;
  ft.target_net = make_relu_network(10, 1, 5, 4.0, 2.0, rng);
  BundleMeta meta;
  meta.seed = 42u;
  const std::string ft_text = serialize_model(ft, meta, BundleMeta{});
  const LoadedModel ft_loaded = parse_model(ft_text);
  CHECK(ft_loaded.kind == kKindVanillaFineTuned);
  REQUIRE(std::holds_alternative<VanillaFineTunedModel>(ft_loaded.model));
  CHECK(std::get<VanillaFineTunedModel>(ft_loaded.model) == ft);
  CHECK(serialize_model(ft_loaded) == ft_text);

  const nlohmann::json doc = nlohmann::json::parse(ft_text);
  CHECK(doc.at("model").at("source_bundle").dump() == serialize_model(v));
}

TEST_CASE("loaded models dispatch prediction by kind") {
  Rng rng(84u);
  const FastNnModel fast = sample_fast_nn(rng, true);
  const LoadedModel l1 = parse_model(serialize_model(fast));
  CHECK(l1.input_dim() == 11);
  const FineTunedModel fine = sample_finetuned(rng);
  const LoadedModel l2 = parse_model(serialize_model(fine, BundleMeta{}, BundleMeta{}));
  CHECK(l2.input_dim() == 11);
  VanillaModel v;
  v.net = make_relu_network(6, 1, 4, 4.0, 5.0, rng);
  const LoadedModel l3 = parse_model(serialize_model(v));
  CHECK(l3.input_dim() == 6);
  VanillaFineTunedModel vf;
  vf.source = v;
  vf.target_net = make_relu_network(7, 1, 4, 4.0, 5.0, rng);
  const LoadedModel l4 = parse_model(serialize_model(vf, BundleMeta{}, BundleMeta{}));
  CHECK(l4.input_dim() == 6);

  std::vector<double> x11(11), x6(6);
  for (auto& v2 : x11) v2 = rng.uniform(-1.0, 1.0);
  for (auto& v2 : x6) v2 = rng.uniform(-1.0, 1.0);
  CHECK(l1.predict(x11) == doctest::Approx(fast_nn_predict(fast, x11)).epsilon(1e-15));
  CHECK(l2.predict(x11) == doctest::Approx(finetune_predict(fine, x11)).epsilon(1e-15));
  CHECK(l3.predict(x6) == doctest::Approx(vanilla_predict(v, x6)).epsilon(1e-15));
  CHECK(l4.predict(x6) == doctest::Approx(vanilla_finetune_predict(vf, x6)).epsilon(1e-15));
}

TEST_CASE("malformed bundles are rejected as data errors") {
  Rng rng(85u);
  const FastNnModel m = sample_fast_nn(rng, false);
  const std::string good = serialize_model(m);

  CHECK_THROWS_AS(parse_model("not json at all"), DataError);
  CHECK_THROWS_AS(parse_model(good.substr(0, good.size() / 2)), DataError);

  nlohmann::json doc = nlohmann::json::parse(good);
  doc["kind"] = "mystery_meat";
  CHECK_THROWS_AS(parse_model(doc.dump()), DataError);

  doc = nlohmann::json::parse(good);
  doc["format"] = "something-else";
  CHECK_THROWS_AS(parse_model(doc.dump()), DataError);

  doc = nlohmann::json::parse(good);
  doc["model"]["net"]["layers"][0]["w"]["data"].erase(0);  // length mismatch
  CHECK_THROWS_AS(parse_model(doc.dump()), DataError);

  doc = nlohmann::json::parse(good);
  doc["model"].erase("selection");
  CHECK_THROWS_AS(parse_model(doc.dump()), DataError);

  doc = nlohmann::json::parse(good);
  doc["model"]["projection"]["source"] = "NotATag";
  CHECK_THROWS_AS(parse_model(doc.dump()), DataError);
}

TEST_CASE("non-finite matrix payloads are rejected at serialization time") {
  // infinity is reserved for the weight bound; matrix payloads must be finite
  Rng rng(86u);
  FastNnModel m = sample_fast_nn(rng, false);
  m.net.layers[0].w(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(serialize_model(m), ValidationError);
}
