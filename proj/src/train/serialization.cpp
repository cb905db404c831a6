#include "qnode/train/serialization.hpp"

namespace qnode::train {

using nlohmann::json;

json model_config_json(const lode::ModelConfig& c) {
  return {{"latent_dim", c.latent_dim},   {"rnn_hidden", c.rnn_hidden},
          {"ode_hidden", c.ode_hidden},   {"dec_hidden", c.dec_hidden},
          {"obs_sigma", c.obs_sigma},     {"substeps", c.substeps},
          {"cell", lode::to_string(c.cell)}, {"learn_obs_sigma", c.learn_obs_sigma}};
}

lode::ModelConfig model_config_from_json(const json& j) {
  lode::ModelConfig c;
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.rnn_hidden = j.at("rnn_hidden").get<std::size_t>();
  c.ode_hidden = j.at("ode_hidden").get<std::size_t>();
  c.dec_hidden = j.at("dec_hidden").get<std::size_t>();
  c.obs_sigma = j.at("obs_sigma").get<double>();
  c.substeps = j.at("substeps").get<int>();
  c.cell = lode::parse_encoder_cell(j.at("cell").get<std::string>());
  c.learn_obs_sigma = j.value("learn_obs_sigma", false);
  return c;
}

json train_config_json(const TrainConfig& c) {
  json j = {{"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"checkpoint_every", c.checkpoint_every},
            {"regime", qsim::to_string(c.regime)}};
  j["clip_norm"] = c.clip_norm ? json(*c.clip_norm) : json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  c.regime = qsim::parse_regime(j.at("regime").get<std::string>());
  if (j.contains("clip_norm") && !j["clip_norm"].is_null()) c.clip_norm = j["clip_norm"].get<double>();
  return c;
}

}  // namespace qnode::train
