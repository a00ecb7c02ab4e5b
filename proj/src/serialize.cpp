#include "fanlasso/serialize.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>

namespace fanlasso {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "fanlasso-model";
constexpr int kVersion = 1;

[[noreturn]] void bad(const std::string& what) { throw DataError("model bundle: " + what); }

void require_finite(const Matrix& m, const char* what) {
  if (has_nonfinite(m)) {
    throw ValidationError(std::string("serialize: non-finite values in ") + what);
  }
}

json matrix_to_json(const Matrix& m, const char* what) {
  require_finite(m, what);
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = m.storage();
  return j;
}

Matrix matrix_from_json(const json& j) {
  const std::size_t rows = j.at("rows").get<std::size_t>();
  const std::size_t cols = j.at("cols").get<std::size_t>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) bad("matrix payload length does not match its shape");
  if (has_nonfinite(data)) bad("non-finite matrix payload");
  return Matrix(rows, cols, std::move(data));
}

json source_tag_to_json(CovarianceSource s) { return covariance_source_name(s); }

CovarianceSource source_tag_from_json(const json& j) {
  const std::string name = j.get<std::string>();
  for (CovarianceSource s : {CovarianceSource::Target, CovarianceSource::Pooled,
                             CovarianceSource::Source, CovarianceSource::External}) {
    if (name == covariance_source_name(s)) return s;
  }
  bad("unknown covariance source tag '" + name + "'");
}

json optional_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (!std::isfinite(*v)) throw ValidationError("serialize: optional bound must be finite");
  return *v;
}

std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json projection_to_json(const DiversifiedProjection& p) {
  json j;
  j["w"] = matrix_to_json(p.w, "the projection");
  j["r_bar"] = p.r_bar;
  j["source"] = source_tag_to_json(p.source);
  j["delta_used"] = optional_to_json(p.delta_used);
  return j;
}

DiversifiedProjection projection_from_json(const json& j) {
  DiversifiedProjection p;
  p.w = matrix_from_json(j.at("w"));
  p.r_bar = j.at("r_bar").get<std::size_t>();
  p.source = source_tag_from_json(j.at("source"));
  p.delta_used = optional_from_json(j.at("delta_used"));
  if (p.w.cols() != p.r_bar) bad("projection width does not match r_bar");
  return p;
}

json selection_to_json(const SelectionLayer& s) {
  json j;
  j["theta"] = matrix_to_json(s.theta, "theta");
  j["tau"] = s.tau;
  j["lambda"] = s.lambda;
  j["trunc_bound"] = optional_to_json(s.trunc_bound);
  return j;
}

SelectionLayer selection_from_json(const json& j) {
  SelectionLayer s;
  s.theta = matrix_from_json(j.at("theta"));
  s.tau = j.at("tau").get<double>();
  s.lambda = j.at("lambda").get<double>();
  s.trunc_bound = optional_from_json(j.at("trunc_bound"));
  if (!(s.tau > 0.0)) bad("tau must be positive");
  if (s.lambda < 0.0) bad("lambda must be nonnegative");
  return s;
}

json net_to_json(const ReluNetwork& n) {
  json j;
  j["input_dim"] = n.input_dim;
  j["depth_l"] = n.depth_l;
  j["width_n"] = n.width_n;
  if (!(n.output_bound_m > 0.0) || !std::isfinite(n.output_bound_m)) {
    throw ValidationError("serialize: output bound must be positive and finite");
  }
  j["output_bound_m"] = n.output_bound_m;
  // infinity (no bound) is stored as null
  j["weight_bound_t"] =
      std::isfinite(n.weight_bound_t) ? json(n.weight_bound_t) : json(nullptr);
  json layers = json::array();
  for (const auto& layer : n.layers) {
    if (has_nonfinite(layer.b)) {
      throw ValidationError("serialize: non-finite values in a bias vector");
    }
    json lj;
    lj["w"] = matrix_to_json(layer.w, "a layer");
    lj["b"] = layer.b;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

ReluNetwork net_from_json(const json& j) {
  ReluNetwork n;
  n.input_dim = j.at("input_dim").get<std::size_t>();
  n.depth_l = j.at("depth_l").get<std::size_t>();
  n.width_n = j.at("width_n").get<std::size_t>();
  n.output_bound_m = j.at("output_bound_m").get<double>();
  const json& bound = j.at("weight_bound_t");
  n.weight_bound_t =
      bound.is_null() ? std::numeric_limits<double>::infinity() : bound.get<double>();
  const json& layers = j.at("layers");
  if (!layers.is_array() || layers.size() != n.depth_l + 1) {
    bad("layer count does not match the declared depth");
  }
  n.layers.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    n.layers[l].w = matrix_from_json(layers[l].at("w"));
    n.layers[l].b = layers[l].at("b").get<std::vector<double>>();
    if (has_nonfinite(n.layers[l].b)) bad("non-finite bias payload");
    if (n.layers[l].b.size() != n.layers[l].w.rows()) {
      bad("bias length does not match the layer weight rows");
    }
    const std::size_t expected_in = l == 0 ? n.input_dim : n.layers[l - 1].w.rows();
    if (n.layers[l].w.cols() != expected_in) bad("layer input width mismatch");
  }
  if (!n.layers.empty() && n.layers.back().w.rows() != 1) bad("final layer must emit one value");
  if (!(n.output_bound_m > 0.0)) bad("output bound must be positive");
  return n;
}

json envelope(const char* kind, const BundleMeta& meta, json model) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = kind;
  j["seed"] = meta.seed;
  j["config_digest"] = meta.config_digest;
  j["model"] = std::move(model);
  return j;
}

BundleMeta meta_from_json(const json& j) {
  BundleMeta meta;
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.config_digest = j.at("config_digest").get<std::string>();
  return meta;
}

json fast_nn_to_json(const FastNnModel& m) {
  json j;
  j["projection"] = projection_to_json(m.projection);
  j["selection"] = selection_to_json(m.selection);
  j["net"] = net_to_json(m.net);
  j["role"] = m.role == ModelRole::Source ? "source" : "target";
  return j;
}

FastNnModel fast_nn_from_json(const json& j) {
  FastNnModel m;
  m.projection = projection_from_json(j.at("projection"));
  m.selection = selection_from_json(j.at("selection"));
  m.net = net_from_json(j.at("net"));
  const std::string role = j.at("role").get<std::string>();
  if (role == "source") {
    m.role = ModelRole::Source;
  } else if (role == "target") {
    m.role = ModelRole::Target;
  } else {
    bad("unknown model role '" + role + "'");
  }
  if (m.selection.theta.rows() != m.projection.w.rows()) {
    bad("selection rows do not match the covariate dimension");
  }
  if (m.net.input_dim != m.projection.r_bar + m.selection.theta.cols()) {
    bad("network input dim is not r_bar + selected count");
  }
  return m;
}

json vanilla_to_json(const VanillaModel& m) {
  json j;
  j["net"] = net_to_json(m.net);
  return j;
}

VanillaModel vanilla_from_json(const json& j) {
  VanillaModel m;
  m.net = net_from_json(j.at("net"));
  return m;
}

json parse_text(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) bad("not valid JSON");
  return doc;
}

void check_envelope(const json& doc, const char* expected_kind = nullptr) {
  if (!doc.is_object()) bad("top level is not an object");
  if (doc.value("format", std::string()) != kFormat) bad("unrecognized format tag");
  if (doc.value("version", -1) != kVersion) bad("unsupported bundle version");
  if (expected_kind && doc.value("kind", std::string()) != expected_kind) {
    bad(std::string("embedded bundle is not of kind ") + expected_kind);
  }
}

}  // namespace

std::string serialize_model(const FastNnModel& model, const BundleMeta& meta) {
  return envelope(kKindFastNnSource, meta, fast_nn_to_json(model)).dump();
}

std::string serialize_model(const FineTunedModel& model, const BundleMeta& meta,
                            const BundleMeta& source_meta) {
  json inner;
  // the embedded source is a complete bundle of its own, byte-identical to
  // serializing the source model separately
  inner["source_bundle"] = envelope(kKindFastNnSource, source_meta, fast_nn_to_json(model.source));
  inner["target_projection"] = projection_to_json(model.target_projection);
  inner["target_selection"] = selection_to_json(model.target_selection);
  inner["target_net"] = net_to_json(model.target_net);
  return envelope(kKindFanLassoFineTuned, meta, std::move(inner)).dump();
}

std::string serialize_model(const VanillaModel& model, const BundleMeta& meta) {
  return envelope(kKindVanillaSource, meta, vanilla_to_json(model)).dump();
}

std::string serialize_model(const VanillaFineTunedModel& model, const BundleMeta& meta,
                            const BundleMeta& source_meta) {
  json inner;
  inner["source_bundle"] = envelope(kKindVanillaSource, source_meta, vanilla_to_json(model.source));
  inner["target_net"] = net_to_json(model.target_net);
  return envelope(kKindVanillaFineTuned, meta, std::move(inner)).dump();
}

std::size_t LoadedModel::input_dim() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FastNnModel>) return m.projection.w.rows();
        if constexpr (std::is_same_v<T, FineTunedModel>) return m.target_projection.w.rows();
        if constexpr (std::is_same_v<T, VanillaModel>) return m.net.input_dim;
        if constexpr (std::is_same_v<T, VanillaFineTunedModel>) return m.source.net.input_dim;
      },
      model);
}

double LoadedModel::predict(std::span<const double> x) const {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FastNnModel>) return fast_nn_predict(m, x);
        if constexpr (std::is_same_v<T, FineTunedModel>) return finetune_predict(m, x);
        if constexpr (std::is_same_v<T, VanillaModel>) return vanilla_predict(m, x);
        if constexpr (std::is_same_v<T, VanillaFineTunedModel>)
          return vanilla_finetune_predict(m, x);
      },
      model);
}

LoadedModel parse_model(const std::string& text) {
  try {
    const json doc = parse_text(text);
    check_envelope(doc);
    LoadedModel out;
    out.kind = doc.at("kind").get<std::string>();
    out.meta = meta_from_json(doc);
    const json& body = doc.at("model");
    if (out.kind == kKindFastNnSource) {
      out.model = fast_nn_from_json(body);
    } else if (out.kind == kKindFanLassoFineTuned) {
      const json& src = body.at("source_bundle");
      check_envelope(src, kKindFastNnSource);
      FineTunedModel m;
      m.source = fast_nn_from_json(src.at("model"));
      out.source_meta = meta_from_json(src);
      m.target_projection = projection_from_json(body.at("target_projection"));
      m.target_selection = selection_from_json(body.at("target_selection"));
      m.target_net = net_from_json(body.at("target_net"));
      if (m.target_net.input_dim !=
          m.target_projection.r_bar + 1 + m.target_selection.theta.cols()) {
        bad("target network input dim is not r_bar + 1 + selected count");
      }
      if (m.source.projection.w.rows() != m.target_projection.w.rows()) {
        bad("source and target covariate dimensions differ");
      }
      out.model = std::move(m);
    } else if (out.kind == kKindVanillaSource) {
      out.model = vanilla_from_json(body);
    } else if (out.kind == kKindVanillaFineTuned) {
      const json& src = body.at("source_bundle");
      check_envelope(src, kKindVanillaSource);
      VanillaFineTunedModel m;
      m.source = vanilla_from_json(src.at("model"));
      out.source_meta = meta_from_json(src);
      m.target_net = net_from_json(body.at("target_net"));
      if (m.target_net.input_dim != m.source.net.input_dim + 1) {
        bad("fine-tuned vanilla input dim is not p + 1");
      }
      out.model = std::move(m);
    } else {
      bad("unknown bundle kind '" + out.kind + "'");
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("model bundle: ") + e.what());
  }
}

std::string serialize_model(const LoadedModel& model) {
  return std::visit(
      [&](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FastNnModel> || std::is_same_v<T, VanillaModel>) {
          return serialize_model(m, model.meta);
        } else {
          return serialize_model(m, model.meta, model.source_meta);
        }
      },
      model.model);
}

}  // namespace fanlasso
