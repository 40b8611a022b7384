#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "lensid/models/adaptnet.hpp"
#include "lensid/models/phase_model.hpp"
#include "lensid/train/loss.hpp"

namespace lensid::train {

namespace detail {

// Unknown keys are configuration mistakes (usually typos), not extensions.
inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed,
                                const std::string& what) {
  check(j.is_object(), ErrorKind::config, what + " config must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) { known = true; break; }
    check(known, ErrorKind::config, what + " config has unknown key: " + item.key());
  }
}

template <typename V>
V get_or(const nlohmann::json& j, const char* key, const V& fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(what + " config key has wrong type: " + std::string(key));
  }
}

} // namespace detail

inline nlohmann::json to_json(const models::AdaptNetConfig& c) {
  return {{"encoder", c.encoder},
          {"decoder_channels", c.decoder_channels},
          {"enable_ssf", c.enable_ssf},
          {"enable_sha", c.enable_sha},
          {"enable_cpf", c.enable_cpf},
          {"cascade_depth", c.cascade_depth},
          {"offset_bound", c.offset_bound},
          {"num_classes", c.num_classes}};
}

inline models::AdaptNetConfig adaptnet_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"encoder", "decoder_channels", "enable_ssf", "enable_sha",
                               "enable_cpf", "cascade_depth", "offset_bound", "num_classes"},
                              "segmentation");
  models::AdaptNetConfig c;
  c.encoder = detail::get_or(j, "encoder", c.encoder, "segmentation");
  c.decoder_channels = detail::get_or(j, "decoder_channels", c.decoder_channels, "segmentation");
  c.enable_ssf = detail::get_or(j, "enable_ssf", c.enable_ssf, "segmentation");
  c.enable_sha = detail::get_or(j, "enable_sha", c.enable_sha, "segmentation");
  c.enable_cpf = detail::get_or(j, "enable_cpf", c.enable_cpf, "segmentation");
  c.cascade_depth = detail::get_or(j, "cascade_depth", c.cascade_depth, "segmentation");
  c.offset_bound = detail::get_or(j, "offset_bound", c.offset_bound, "segmentation");
  c.num_classes = detail::get_or(j, "num_classes", c.num_classes, "segmentation");
  c.validate();
  return c;
}

inline nlohmann::json to_json(const models::PhaseModelConfig& c) {
  return {{"backbone", c.backbone},
          {"rnn_type", c.rnn_type},
          {"rnn_units", c.rnn_units},
          {"dense_dim", c.dense_dim},
          {"dropout_rate", c.dropout_rate},
          {"sequence_length", c.sequence_length}};
}

inline models::PhaseModelConfig phase_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(
      j, {"backbone", "rnn_type", "rnn_units", "dense_dim", "dropout_rate", "sequence_length"},
      "phase");
  models::PhaseModelConfig c;
  c.backbone = detail::get_or(j, "backbone", c.backbone, "phase");
  c.rnn_type = detail::get_or(j, "rnn_type", c.rnn_type, "phase");
  c.rnn_units = detail::get_or(j, "rnn_units", c.rnn_units, "phase");
  c.dense_dim = detail::get_or(j, "dense_dim", c.dense_dim, "phase");
  c.dropout_rate = detail::get_or(j, "dropout_rate", c.dropout_rate, "phase");
  c.sequence_length = detail::get_or(j, "sequence_length", c.sequence_length, "phase");
  c.validate();
  return c;
}

inline nlohmann::json to_json(const LossConfig& c) {
  return {{"lambda", c.lambda}, {"dice_smooth", c.dice_smooth}};
}

inline LossConfig loss_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j, {"lambda", "dice_smooth"}, "loss");
  LossConfig c;
  c.lambda = detail::get_or(j, "lambda", c.lambda, "loss");
  c.dice_smooth = detail::get_or(j, "dice_smooth", c.dice_smooth, "loss");
  c.validate();
  return c;
}

} // namespace lensid::train
