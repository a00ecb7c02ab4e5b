#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>

#include "fanlasso/fastnn.hpp"

namespace fanlasso {

// Metadata stored alongside the weights in a model bundle.
struct BundleMeta {
  std::uint64_t seed = 0;
  std::string config_digest;  // empty when unknown

  bool operator==(const BundleMeta&) const = default;
};

inline constexpr const char* kKindFastNnSource = "fast_nn_source";
inline constexpr const char* kKindFanLassoFineTuned = "fan_lasso_finetuned";
inline constexpr const char* kKindVanillaSource = "vanilla_source";
inline constexpr const char* kKindVanillaFineTuned = "vanilla_finetuned";

// JSON text with sorted keys and round-trip exact doubles: serializing the
// parse of a serialization reproduces the bytes. Infinite weight bounds and
// absent optionals are stored as null. Fine-tuned bundles embed the source
// bundle verbatim (same bytes as serializing the source on its own with
// source_meta).
std::string serialize_model(const FastNnModel& model, const BundleMeta& meta = {});
std::string serialize_model(const FineTunedModel& model, const BundleMeta& meta = {},
                            const BundleMeta& source_meta = {});
std::string serialize_model(const VanillaModel& model, const BundleMeta& meta = {});
std::string serialize_model(const VanillaFineTunedModel& model, const BundleMeta& meta = {},
                            const BundleMeta& source_meta = {});

// A parsed bundle of any kind, with uniform prediction dispatch.
struct LoadedModel {
  std::string kind;
  BundleMeta meta;
  BundleMeta source_meta;  // meaningful for the fine-tuned kinds
  std::variant<FastNnModel, FineTunedModel, VanillaModel, VanillaFineTunedModel> model;

  // expected covariate dimension of predict()
  std::size_t input_dim() const;
  double predict(std::span<const double> x) const;
};

// Throws DataError on malformed text, unknown kinds, or inconsistent shapes.
LoadedModel parse_model(const std::string& text);

std::string serialize_model(const LoadedModel& model);

}  // namespace fanlasso
