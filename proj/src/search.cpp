#include "actevo/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "actevo/errors.hpp"

namespace actevo::search {

namespace {

// Stream tags for seed derivation.
constexpr std::uint64_t kDataStream = 0x64617461;
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kGenStream = 0x67656e00;
constexpr std::uint64_t kRandStream = 0x726e6400;
constexpr std::uint64_t kSlotStream = 0x736c6f74;
constexpr std::uint64_t kNetStream = 0x6e657400;
constexpr std::uint64_t kTrainStream = 0x7472616e;

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kEvolution: return "evolution";
    case Strategy::kRandom: return "random";
    case Strategy::kExhaustive: return "exhaustive";
  }
  return "?";
}

std::string to_string(FitnessMode m) {
  return m == FitnessMode::kLossBased ? "loss" : "accuracy";
}

std::string to_string(Origin o) {
  switch (o) {
    case Origin::kInitial: return "initial";
    case Origin::kElite: return "elite";
    case Origin::kRandomInject: return "random_inject";
    case Origin::kOffspring: return "offspring";
    case Origin::kEnumerated: return "enumerated";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "evolution") return Strategy::kEvolution;
  if (s == "random") return Strategy::kRandom;
  if (s == "exhaustive") return Strategy::kExhaustive;
  throw ConfigError("unknown strategy '" + s + "'");
}

FitnessMode fitness_from_string(const std::string& s) {
  if (s == "loss") return FitnessMode::kLossBased;
  if (s == "accuracy") return FitnessMode::kAccuracyBased;
  throw ConfigError("unknown fitness mode '" + s + "' (want loss|accuracy)");
}

void SearchConfig::validate() const {
  if (space_depth < 1) throw ConfigError("space_depth must be >= 1");
  if (population < 1) throw ConfigError("population must be >= 1");
  if (generations < 1) throw ConfigError("generations must be >= 1");
  if (strategy == Strategy::kEvolution) {
    if (elite < 0 || random_inject < 0 || offspring < 0)
      throw ConfigError("population composition counts must be non-negative");
    if (elite + random_inject + offspring != population)
      throw ConfigError("elite + random_inject + offspring must equal population");
  }
  if (static_cast<int>(seed_exprs.size()) > population)
    throw ConfigError("more seed expressions than population slots");
  net.validate();
  train.validate();
  policy.validate();
  if (data.classes < 2) throw ConfigError("need at least 2 classes");
}

std::vector<double> fitness(std::span<const double> metrics) {
  if (metrics.empty()) throw EmptyPopulation("fitness of an empty population");
  const double m = *std::max_element(metrics.begin(), metrics.end());
  std::vector<double> p(metrics.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    p[i] = std::exp(metrics[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double fitness_metric(const nn::TrainingMetrics& m, FitnessMode mode) {
  return mode == FitnessMode::kLossBased ? -m.final_val_loss : m.final_val_acc;
}

std::vector<int> select_parents(std::span<const double> p, int count, Rng& rng) {
  std::vector<int> out;
  out.reserve(count);
  for (int c = 0; c < count; ++c) {
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = static_cast<int>(p.size()) - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        pick = static_cast<int>(i);
        break;
      }
    }
    out.push_back(pick);
  }
  return out;
}

std::vector<Candidate> next_generation(const GenerationRecord& prev,
                                       const SearchConfig& cfg, Rng& rng) {
  if (cfg.elite + cfg.random_inject + cfg.offspring != cfg.population)
    throw ConfigError("elite + random_inject + offspring must equal population");
  const expr::Alphabet alphabet = cfg.alphabet();

  // Elites: best by the fitness metric, ties broken by canonical id.
  std::vector<int> order(prev.candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = fitness_metric(prev.candidates[a].metrics, cfg.fitness);
    const double mb = fitness_metric(prev.candidates[b].metrics, cfg.fitness);
    if (ma != mb) return ma > mb;
    return prev.candidates[a].id < prev.candidates[b].id;
  });

  std::vector<Candidate> next;
  next.reserve(cfg.population);
  for (int e = 0; e < cfg.elite; ++e) {
    Candidate c = prev.candidates[order[e]];
    c.origin = Origin::kElite;
    next.push_back(std::move(c));
  }
  for (int r = 0; r < cfg.random_inject; ++r) {
    Candidate c;
    c.tree = expr::sample_random(cfg.space_depth, alphabet, rng);
    c.id = expr::canonical_id(c.tree);
    c.origin = Origin::kRandomInject;
    next.push_back(std::move(c));
  }
  const std::vector<int> parents =
      select_parents(prev.fitness_vector, 2 * cfg.offspring, rng);
  for (int o = 0; o < cfg.offspring; ++o) {
    const Candidate& a = prev.candidates[parents[2 * o]];
    const Candidate& b = prev.candidates[parents[2 * o + 1]];
    Candidate c;
    c.tree = expr::mutate(expr::crossover(a.tree, b.tree, rng), alphabet, rng);
    c.id = expr::canonical_id(c.tree);
    c.origin = Origin::kOffspring;
    next.push_back(std::move(c));
  }
  return next;
}

std::vector<Candidate> top_k(const SearchResult& result, int k) {
  std::unordered_map<std::string, const Candidate*> best;
  std::vector<const Candidate*> uniq;
  for (const GenerationRecord& g : result.history)
    for (const Candidate& c : g.candidates)
      if (best.emplace(c.id, &c).second) uniq.push_back(&c);
  std::sort(uniq.begin(), uniq.end(), [](const Candidate* a, const Candidate* b) {
    if (a->metrics.final_val_acc != b->metrics.final_val_acc)
      return a->metrics.final_val_acc > b->metrics.final_val_acc;
    if (a->metrics.final_val_loss != b->metrics.final_val_loss)
      return a->metrics.final_val_loss < b->metrics.final_val_loss;
    return a->id < b->id;
  });
  std::vector<Candidate> out;
  for (const Candidate* c : uniq) {
    if (static_cast<int>(out.size()) >= k) break;
    out.push_back(*c);
  }
  return out;
}

std::vector<Candidate> SearchResult::top(int k) const { return top_k(*this, k); }

data::Dataset build_dataset(const SearchConfig& cfg) {
  Rng rng(derive_seed(cfg.master_seed, {kDataStream}));
  data::Dataset ds = data::generate_synthetic(cfg.data.kind, cfg.data.n_per_class,
                                              cfg.data.classes, cfg.data.noise, rng);
  ds = data::split_balanced(std::move(ds), cfg.data.val_per_class,
                            cfg.data.test_per_class, rng);
  return data::standardize(std::move(ds));
}

std::uint64_t slot_seed(std::uint64_t master_seed, int generation, int slot) {
  return derive_seed(master_seed, {kSlotStream, static_cast<std::uint64_t>(generation),
                                   static_cast<std::uint64_t>(slot)});
}

nn::TrainingMetrics evaluate_candidate(const expr::ExprTree& tree,
                                       std::uint64_t seed,
                                       const data::Dataset& dataset,
                                       const SearchConfig& cfg) {
  nn::NetworkConfig ncfg = cfg.net;
  ncfg.input_dim = dataset.dim();
  ncfg.num_classes = dataset.classes;
  Rng init_rng(derive_seed(seed, {kNetStream}));
  nn::Network net(ncfg, init_rng);
  nn::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, {kTrainStream});
  return nn::train(net, tree, dataset, tc, cfg.policy);
}

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Evaluates one generation's population. Only canonical ids not already in
// the cache are trained; everything else is a cache hit. The unique-id job
// list is computed serially, so results do not depend on thread count.
void evaluate_generation(int gen, std::vector<Candidate>& pop,
                         const SearchConfig& cfg, const data::Dataset& dataset,
                         int jobs,
                         std::unordered_map<std::string, nn::TrainingMetrics>& cache,
                         SearchResult& result, RecordSink* sink) {
  struct Job {
    std::string id;
    const expr::ExprTree* tree;
    std::uint64_t seed;
    std::vector<int> slots;
    nn::TrainingMetrics metrics;
    double seconds = 0.0;
  };
  std::vector<Job> todo;
  std::unordered_map<std::string, int> job_of;

  for (int slot = 0; slot < static_cast<int>(pop.size()); ++slot) {
    Candidate& c = pop[slot];
    c.seed = slot_seed(cfg.master_seed, gen, slot);
    if (cache.count(c.id)) continue;
    auto [it, fresh] = job_of.emplace(c.id, static_cast<int>(todo.size()));
    if (fresh)
      todo.push_back(Job{c.id, &c.tree, c.seed, {slot}, {}, 0.0});
    else
      todo[it->second].slots.push_back(slot);
  }

  std::mutex emit_mutex;
  auto emit_slot = [&](int slot) {
    if (sink != nullptr) sink->on_candidate(gen, slot, pop[slot]);
  };

  // Slots resolved from earlier generations are pure cache hits.
  {
    std::lock_guard<std::mutex> lock(emit_mutex);
    for (int slot = 0; slot < static_cast<int>(pop.size()); ++slot) {
      Candidate& c = pop[slot];
      const auto it = cache.find(c.id);
      if (it != cache.end()) {
        c.metrics = it->second;
        c.train_seconds = 0.0;
        ++result.cache_hits;
        emit_slot(slot);
      }
    }
  }

#ifdef _OPENMP
  const int threads = std::max(1, jobs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
#endif
  for (int j = 0; j < static_cast<int>(todo.size()); ++j) {
    Job& job = todo[j];
    const auto t0 = std::chrono::steady_clock::now();
    job.metrics = evaluate_candidate(*job.tree, job.seed, dataset, cfg);
    job.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::lock_guard<std::mutex> lock(emit_mutex);
    for (std::size_t s = 0; s < job.slots.size(); ++s) {
      Candidate& c = pop[job.slots[s]];
      c.metrics = job.metrics;
      c.train_seconds = s == 0 ? job.seconds : 0.0;
      if (s > 0) ++result.cache_hits;
      emit_slot(job.slots[s]);
    }
  }

  result.trainings += static_cast<int>(todo.size());
  for (const Job& job : todo) cache.emplace(job.id, job.metrics);
}

GenerationRecord finish_generation(int gen, std::vector<Candidate> pop,
                                   const SearchConfig& cfg,
                                   const SearchResult& result) {
  GenerationRecord rec;
  rec.index = gen;
  rec.candidates = std::move(pop);

  std::vector<double> metric;
  metric.reserve(rec.candidates.size());
  for (const Candidate& c : rec.candidates)
    metric.push_back(fitness_metric(c.metrics, cfg.fitness));
  rec.fitness_vector = fitness(metric);

  double best_acc = 0.0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (const Candidate& c : rec.candidates) {
    best_acc = std::max(best_acc, c.metrics.final_val_acc);
    best_loss = std::min(best_loss, c.metrics.final_val_loss);
  }
  rec.best_acc_in_gen = best_acc;
  rec.best_loss_in_gen = best_loss;
  if (result.history.empty()) {
    rec.best_acc_so_far = best_acc;
    rec.best_loss_so_far = best_loss;
  } else {
    rec.best_acc_so_far = std::max(best_acc, result.history.back().best_acc_so_far);
    rec.best_loss_so_far =
        std::min(best_loss, result.history.back().best_loss_so_far);
  }
  return rec;
}

// Reconstructs a fully persisted generation from resume rows.
std::vector<Candidate> candidates_from_rows(
    const std::vector<ResumeState::Row>& rows, int gen, int expected,
    const expr::Alphabet& alphabet) {
  std::vector<Candidate> pop(expected);
  std::vector<bool> seen(expected, false);
  for (const auto& row : rows) {
    if (row.generation != gen) continue;
    if (row.slot < 0 || row.slot >= expected)
      throw ResumeMismatch("resume records have an out-of-range slot");
    Candidate c;
    c.tree = expr::parse_tree(row.expr, alphabet);
    c.id = row.expr;
    c.origin = row.origin;
    c.metrics = row.metrics;
    c.seed = row.seed;
    pop[row.slot] = std::move(c);
    seen[row.slot] = true;
  }
  for (bool s : seen)
    if (!s) throw ResumeMismatch("resume records are missing slots");
  return pop;
}

}  // namespace

std::string run_id_for(const SearchConfig& cfg) {
  std::string key = to_string(cfg.strategy);
  key += '|';
  key += std::to_string(cfg.master_seed);
  key += '|';
  key += std::to_string(cfg.population);
  key += '|';
  key += std::to_string(cfg.generations);
  key += '|';
  key += std::to_string(cfg.space_depth);
  return "run-" + hex64(fnv1a64(key));
}

SearchResult run_search(const SearchConfig& cfg, int jobs, RecordSink* sink,
                        const ResumeState* resume) {
  cfg.validate();
  const expr::Alphabet alphabet = cfg.alphabet();

  SearchResult result;
  result.run_id = run_id_for(cfg);
  if (sink != nullptr) sink->on_header(cfg, result.run_id);

  const data::Dataset dataset = build_dataset(cfg);
  std::unordered_map<std::string, nn::TrainingMetrics> cache;

  const int done = resume != nullptr ? resume->completed_generations : 0;

  // Exhaustive search: the enumeration is chunked into generation-sized
  // blocks so that persistence and resume work the same way as the other
  // strategies.
  std::vector<expr::ExprTree> enumeration;
  int total_generations = cfg.generations;
  if (cfg.strategy == Strategy::kExhaustive) {
    if (cfg.space_depth != 1)
      throw SpaceTooLarge("exhaustive search is only feasible in S_1; S_" +
                          std::to_string(cfg.space_depth) + " has " +
                          expr::count_space(cfg.space_depth, alphabet) +
                          " function strings");
    enumeration = expr::enumerate_s1(alphabet);
    total_generations = static_cast<int>(
        (enumeration.size() + cfg.population - 1) / cfg.population);
  }

  std::vector<Candidate> pop;
  for (int gen = 0; gen < total_generations; ++gen) {
    // Assemble this generation's population.
    if (cfg.strategy == Strategy::kExhaustive) {
      pop.clear();
      const int lo = gen * cfg.population;
      const int hi = std::min<int>(static_cast<int>(enumeration.size()),
                                   lo + cfg.population);
      for (int i = lo; i < hi; ++i) {
        Candidate c;
        c.tree = enumeration[i];
        c.id = expr::canonical_id(c.tree);
        c.origin = Origin::kEnumerated;
        pop.push_back(std::move(c));
      }
    } else if (cfg.strategy == Strategy::kRandom) {
      Rng rng(derive_seed(cfg.master_seed, {kRandStream, static_cast<std::uint64_t>(gen)}));
      pop.clear();
      for (int i = 0; i < cfg.population; ++i) {
        Candidate c;
        c.tree = expr::sample_random(cfg.space_depth, alphabet, rng);
        c.id = expr::canonical_id(c.tree);
        c.origin = Origin::kRandomInject;
        pop.push_back(std::move(c));
      }
    } else if (gen == 0) {
      Rng rng(derive_seed(cfg.master_seed, {kInitStream}));
      pop.clear();
      for (const std::string& text : cfg.seed_exprs) {
        Candidate c;
        c.tree = expr::parse_tree(text, alphabet);
        if (expr::depth(c.tree) != cfg.space_depth)
          throw ConfigError("seed expression '" + text + "' is not in S_" +
                            std::to_string(cfg.space_depth));
        c.id = expr::canonical_id(c.tree);
        c.origin = Origin::kInitial;
        pop.push_back(std::move(c));
      }
      while (static_cast<int>(pop.size()) < cfg.population) {
        Candidate c;
        c.tree = expr::sample_random(cfg.space_depth, alphabet, rng);
        c.id = expr::canonical_id(c.tree);
        c.origin = Origin::kInitial;
        pop.push_back(std::move(c));
      }
    } else {
      Rng rng(derive_seed(cfg.master_seed, {kGenStream, static_cast<std::uint64_t>(gen)}));
      pop = next_generation(result.history.back(), cfg, rng);
    }

    if (gen < done) {
      // Fully persisted: restore metrics instead of retraining.
      pop = candidates_from_rows(resume->rows, gen,
                                 static_cast<int>(pop.size()), alphabet);
      for (const Candidate& c : pop) cache.emplace(c.id, c.metrics);
    } else {
      evaluate_generation(gen, pop, cfg, dataset, jobs, cache, result, sink);
    }

    result.history.push_back(finish_generation(gen, std::move(pop), cfg, result));
    if (sink != nullptr && gen >= done) sink->on_generation_complete(gen);
  }

  return result;
}

SearchResult run_evolution(const SearchConfig& cfg, int jobs, RecordSink* sink) {
  if (cfg.strategy != Strategy::kEvolution)
    throw ConfigError("run_evolution requires strategy = evolution");
  return run_search(cfg, jobs, sink);
}

SearchResult run_random_search(const SearchConfig& cfg, int jobs,
                               RecordSink* sink) {
  if (cfg.strategy != Strategy::kRandom)
    throw ConfigError("run_random_search requires strategy = random");
  return run_search(cfg, jobs, sink);
}

SearchResult run_exhaustive(const SearchConfig& cfg, int jobs, RecordSink* sink) {
  if (cfg.strategy != Strategy::kExhaustive)
    throw ConfigError("run_exhaustive requires strategy = exhaustive");
  return run_search(cfg, jobs, sink);
}

}  // namespace actevo::search
