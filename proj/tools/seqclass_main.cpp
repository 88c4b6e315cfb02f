// SPDX-License-Identifier: Apache-2.0
/**
 * @file   seqclass_main.cpp
 * @brief  seqclass command-line front end.
 */

#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace seqclass;
using namespace seqclass::cli;

CellKind parse_cell(const std::string &name) {
  return name == "rnn" ? CellKind::rnn : CellKind::lstm;
}

void add_training_flags(CLI::App *cmd, TrainOptions &o,
                        std::size_t &hidden_flag, std::string &cell_flag) {
  auto &c = o.config;
  cmd->add_option("--train", o.train_path, "Training TSV (id, label, text)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--valid", o.valid_path, "Validation TSV")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--cell", cell_flag, "Recurrent cell")
      ->check(CLI::IsMember({"rnn", "lstm"}))
      ->capture_default_str();
  cmd->add_option("--classes", c.classes,
                  "Number of classes (2 = sigmoid head, >2 = softmax head)")
      ->check(CLI::Range(2, 1000))
      ->capture_default_str();
  cmd->add_option("--embedding", c.embedding_dim, "Embedding dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--hidden", hidden_flag,
                  "Hidden dimension (default: embedding dimension)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--lr", c.learning_rate, "SGD learning rate")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--dropout", c.dropout_rate, "Dropout rate on final hidden state")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  cmd->add_option("--epochs", c.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "Minibatch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-len", c.max_len, "Sequence length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--seed", c.seed)->capture_default_str();
  cmd->add_option("--top-words", c.top_words,
                  "Keep only the N most frequent training tokens")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--clip", c.clip_norm,
                  "Gradient L2 clipping norm per batch (0 disables)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--class-weights", c.class_weights,
                  "Per-class loss weights, one per class")
      ->delimiter(',');
  cmd->add_flag("!--truncate-long", o.discard_long,
                "Truncate overlong training tweets instead of discarding them");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Recurrent-network tweet classifier"};
  app.require_subcommand(1);

  TrainOptions train_opts;
  std::size_t train_hidden = 0;
  std::string train_cell = "lstm";
  auto *train_cmd = app.add_subcommand("train", "Train a model");
  add_training_flags(train_cmd, train_opts, train_hidden, train_cell);
  train_cmd->add_option("--out", train_opts.out_path, "Model file to write")
      ->required();
  train_cmd->add_option("--history", train_opts.history_path,
                        "Per-epoch history TSV");

  EvalOptions eval_opts;
  std::vector<std::size_t> eval_subset;
  auto *eval_cmd = app.add_subcommand("eval", "Score a labelled TSV");
  eval_cmd->add_option("--model", eval_opts.model_path)->required();
  eval_cmd->add_option("--data", eval_opts.data_path)->required();
  eval_cmd->add_option("--subset", eval_subset,
                       "Classes for micro-averaged P/R/F (default: 1 for "
                       "binary, 0,1 for 3-class)")
      ->delimiter(',');
  eval_cmd->add_option("--positive", eval_opts.positive_class,
                       "Class scored as adr_precision/recall/f1")
      ->capture_default_str();
  eval_cmd->add_option("--threshold", eval_opts.threshold,
                       "Decision threshold for the sigmoid head")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  eval_cmd->add_option("--classes", eval_opts.classes,
                       "Expected class count (checked against the model)");
  eval_cmd->add_option("--max-len", eval_opts.max_len,
                       "Expected sequence length (checked against the model)");

  PredictOptions predict_opts;
  auto *predict_cmd = app.add_subcommand("predict", "Classify a TSV");
  predict_cmd->add_option("--model", predict_opts.model_path)->required();
  predict_cmd->add_option("--data", predict_opts.data_path)->required();
  predict_cmd->add_option("--out", predict_opts.out_path,
                          "Output file (default: stdout)");
  predict_cmd->add_option("--threshold", predict_opts.threshold)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  GradcheckOptions gc_opts;
  std::string gc_cell = "lstm";
  auto *gc_cmd = app.add_subcommand(
      "gradcheck", "Compare BPTT gradients with central differences");
  gc_cmd->add_option("--cell", gc_cell)
      ->check(CLI::IsMember({"rnn", "lstm"}))
      ->capture_default_str();
  gc_cmd->add_option("--hidden", gc_opts.hidden)->check(CLI::PositiveNumber)->capture_default_str();
  gc_cmd->add_option("--len", gc_opts.len)->check(CLI::PositiveNumber)->capture_default_str();
  gc_cmd->add_option("--embedding", gc_opts.embedding)->check(CLI::PositiveNumber)->capture_default_str();
  gc_cmd->add_option("--vocab", gc_opts.vocab)->check(CLI::PositiveNumber)->capture_default_str();
  gc_cmd->add_option("--classes", gc_opts.classes)->check(CLI::Range(2, 1000))->capture_default_str();
  gc_cmd->add_option("--seed", gc_opts.seed)->capture_default_str();
  gc_cmd->add_option("--eps", gc_opts.eps, "Finite-difference step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SweepOptions sweep_opts;
  std::size_t sweep_hidden = 0;
  std::string sweep_cell = "lstm";
  auto *sweep_cmd =
      app.add_subcommand("sweep", "Train once per embedding size");
  add_training_flags(sweep_cmd, sweep_opts.train, sweep_hidden, sweep_cell);
  sweep_cmd->add_option("--sizes", sweep_opts.embedding_sizes,
                        "Embedding sizes to try")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_usage;
  }

  if (*train_cmd) {
    train_opts.config.cell = parse_cell(train_cell);
    if (train_hidden)
      train_opts.config.hidden_dim = train_hidden;
    return run_train(train_opts, std::cout, std::cerr);
  }
  if (*eval_cmd) {
    if (!eval_subset.empty())
      eval_opts.subset = std::set<std::size_t>(eval_subset.begin(),
                                               eval_subset.end());
    return run_eval(eval_opts, std::cout, std::cerr);
  }
  if (*predict_cmd)
    return run_predict(predict_opts, std::cout, std::cerr);
  if (*gc_cmd) {
    gc_opts.cell = parse_cell(gc_cell);
    return run_gradcheck(gc_opts, std::cout, std::cerr);
  }
  if (*sweep_cmd) {
    sweep_opts.train.config.cell = parse_cell(sweep_cell);
    if (sweep_hidden) {
      sweep_opts.train.config.hidden_dim = sweep_hidden;
      sweep_opts.hidden_follows_embedding = false;
    }
    return run_sweep(sweep_opts, std::cout, std::cerr);
  }
  return exit_usage;
}
