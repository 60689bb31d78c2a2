// Generates a small synthetic dataset, trains a one-hop model for a few
// epochs and prints dev accuracy plus the attention of the first dev problem.

#include <cstdio>
#include <iostream>

#include "ham/ham.hpp"

int main() {
  ham::SynthConfig data_config;
  data_config.problems = 120;
  data_config.seed = 3;
  auto data = ham::generate(data_config);
  auto parts = ham::split(data.problems, 0.75, 0.25, 0.0, 3);

  ham::TrainConfig config;
  config.model.embedding_dim = config.model.hidden_dim = config.model.memory_dim = 16;
  config.model.hops = 1;
  config.epochs = 10;
  auto model = ham::HamModel::create(config.model, ham::Vocabulary::from_problems(parts.train), 3);
  auto result = ham::train(model, config, parts.train, parts.dev, [](const ham::EpochMetrics& m) {
    std::printf("epoch %2d  loss %.4f  dev %.3f\n", m.epoch, m.train_loss, m.dev_accuracy);
  });

  const auto& problem = parts.dev.front();
  std::cout << ham::attention_to_json(result.model.attention(problem), 2).dump(2) << "\n";
  return 0;
}
