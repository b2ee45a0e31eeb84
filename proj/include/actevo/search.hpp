#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actevo/data.hpp"
#include "actevo/expr.hpp"
#include "actevo/nn.hpp"
#include "actevo/numerics.hpp"

namespace actevo::search {

enum class Strategy { kEvolution, kRandom, kExhaustive };
enum class FitnessMode { kLossBased, kAccuracyBased };
enum class Origin { kInitial, kElite, kRandomInject, kOffspring, kEnumerated };

std::string to_string(Strategy s);
std::string to_string(FitnessMode m);
std::string to_string(Origin o);
Strategy strategy_from_string(const std::string& s);
FitnessMode fitness_from_string(const std::string& s);

struct DataConfig {
  data::SyntheticKind kind = data::SyntheticKind::kSpirals;
  int classes = 3;
  int n_per_class = 700;  // generated per class, before splitting
  int val_per_class = 100;
  int test_per_class = 100;
  double noise = 0.15;
};

struct SearchConfig {
  Strategy strategy = Strategy::kEvolution;
  int space_depth = 2;
  int population = 50;
  int elite = 5;
  int random_inject = 10;
  int offspring = 35;
  int generations = 10;
  FitnessMode fitness = FitnessMode::kLossBased;
  std::uint64_t master_seed = 0;
  bool extended_alphabet = false;
  // Optional deterministic members of the initial population; must live in
  // S_{space_depth}. The rest of generation 0 is sampled uniformly.
  std::vector<std::string> seed_exprs;

  nn::NetworkConfig net;
  nn::TrainConfig train;
  DataConfig data;
  num::SafetyPolicy policy;

  expr::Alphabet alphabet() const { return expr::Alphabet{extended_alphabet}; }
  void validate() const;
};

struct Candidate {
  expr::ExprTree tree;
  std::string id;
  Origin origin = Origin::kInitial;
  nn::TrainingMetrics metrics;
  std::uint64_t seed = 0;
  double train_seconds = 0.0;
};

struct GenerationRecord {
  int index = 0;
  std::vector<Candidate> candidates;
  std::vector<double> fitness_vector;  // sums to 1
  double best_acc_in_gen = 0.0;
  double best_acc_so_far = 0.0;
  double best_loss_in_gen = 0.0;  // minimum validation loss
  double best_loss_so_far = 0.0;
};

struct SearchResult {
  std::string run_id;
  std::vector<GenerationRecord> history;
  int trainings = 0;   // actual trainings run (cache misses)
  int cache_hits = 0;

  std::vector<Candidate> top(int k) const;
};

// Softmax of the metric vector, computed shift-invariantly.
std::vector<double> fitness(std::span<const double> metrics);

// The per-candidate scalar the fitness is a softmax of: validation accuracy,
// or negative validation loss.
double fitness_metric(const nn::TrainingMetrics& m, FitnessMode mode);

// `count` independent draws (with replacement) from the categorical
// distribution p; returns indices.
std::vector<int> select_parents(std::span<const double> p, int count, Rng& rng);

// Builds the next population from a fully evaluated generation: top-`elite`
// by the fitness metric (ties by canonical id), `random_inject` fresh
// uniform samples, and `offspring` children from crossover followed by
// mutation with parents drawn fitness-proportionally.
std::vector<Candidate> next_generation(const GenerationRecord& prev,
                                       const SearchConfig& cfg, Rng& rng);

// Ranks the whole history by validation accuracy (ties: lower loss, then
// id), deduplicated by canonical id.
std::vector<Candidate> top_k(const SearchResult& result, int k);

// Streaming output interface. Candidate callbacks may arrive out of slot
// order when evaluations run in parallel; generation_complete marks a
// persistence barrier.
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual void on_header(const SearchConfig& /*cfg*/, const std::string& /*run_id*/) {}
  virtual void on_candidate(int /*generation*/, int /*slot*/, const Candidate& /*c*/) {}
  virtual void on_generation_complete(int /*generation*/) {}
};

// Pre-evaluated records used to resume an interrupted run: everything from
// fully persisted generations, in slot order.
struct ResumeState {
  int completed_generations = 0;
  // (generation, slot) -> (expr, origin, metrics)
  struct Row {
    int generation;
    int slot;
    std::string expr;
    Origin origin;
    nn::TrainingMetrics metrics;
    std::uint64_t seed;
  };
  std::vector<Row> rows;
};

std::string run_id_for(const SearchConfig& cfg);

// Runs the configured strategy to completion. Candidate evaluations within
// a generation run on up to `jobs` threads; records and results are
// bit-identical regardless of jobs. Resuming replays persisted generations
// without retraining and continues deterministically.
SearchResult run_search(const SearchConfig& cfg, int jobs,
                        RecordSink* sink = nullptr,
                        const ResumeState* resume = nullptr);

SearchResult run_evolution(const SearchConfig& cfg, int jobs = 1,
                           RecordSink* sink = nullptr);
SearchResult run_random_search(const SearchConfig& cfg, int jobs = 1,
                               RecordSink* sink = nullptr);
SearchResult run_exhaustive(const SearchConfig& cfg, int jobs = 1,
                            RecordSink* sink = nullptr);

// The dataset a config describes, including splits and standardization.
data::Dataset build_dataset(const SearchConfig& cfg);

// Trains one candidate with the slot seed and returns its metrics.
nn::TrainingMetrics evaluate_candidate(const expr::ExprTree& tree,
                                       std::uint64_t seed,
                                       const data::Dataset& dataset,
                                       const SearchConfig& cfg);

// Stable per-slot seed: a hash of (master_seed, generation, slot).
std::uint64_t slot_seed(std::uint64_t master_seed, int generation, int slot);

}  // namespace actevo::search
