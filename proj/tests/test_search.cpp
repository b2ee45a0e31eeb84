#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "actevo/errors.hpp"
#include "actevo/search.hpp"

using namespace actevo;
using search::Candidate;
using search::FitnessMode;
using search::GenerationRecord;
using search::Origin;
using search::SearchConfig;
using search::SearchResult;
using search::Strategy;

namespace {

// Small enough for a unit test, large enough to exercise the machinery.
SearchConfig tiny_config() {
  SearchConfig cfg;
  cfg.strategy = Strategy::kEvolution;
  cfg.space_depth = 1;
  cfg.population = 6;
  cfg.elite = 1;
  cfg.random_inject = 2;
  cfg.offspring = 3;
  cfg.generations = 3;
  cfg.master_seed = 99;
  cfg.net.hidden_layers = {8};
  cfg.train.epochs = 2;
  cfg.train.batch_size = 64;
  cfg.data.n_per_class = 60;
  cfg.data.val_per_class = 15;
  cfg.data.test_per_class = 0;
  return cfg;
}

GenerationRecord fake_generation(const SearchConfig& cfg,
                                 const std::vector<double>& accs) {
  GenerationRecord rec;
  rec.index = 0;
  Rng rng(5);
  std::vector<double> metric;
  for (double acc : accs) {
    Candidate c;
    c.tree = expr::sample_random(cfg.space_depth, cfg.alphabet(), rng);
    c.id = expr::canonical_id(c.tree);
    c.metrics.final_val_acc = acc;
    c.metrics.final_val_loss = 1.0 - acc;
    rec.candidates.push_back(std::move(c));
    metric.push_back(search::fitness_metric(rec.candidates.back().metrics,
                                            cfg.fitness));
  }
  rec.fitness_vector = search::fitness(metric);
  return rec;
}

bool results_identical(const SearchResult& a, const SearchResult& b) {
  if (a.run_id != b.run_id) return false;
  if (a.history.size() != b.history.size()) return false;
  for (std::size_t g = 0; g < a.history.size(); ++g) {
    const auto& ga = a.history[g];
    const auto& gb = b.history[g];
    if (ga.candidates.size() != gb.candidates.size()) return false;
    for (std::size_t i = 0; i < ga.candidates.size(); ++i) {
      const auto& ca = ga.candidates[i];
      const auto& cb = gb.candidates[i];
      if (ca.id != cb.id || ca.origin != cb.origin || ca.seed != cb.seed)
        return false;
      if (ca.metrics.final_val_acc != cb.metrics.final_val_acc) return false;
      if (ca.metrics.final_val_loss != cb.metrics.final_val_loss) return false;
      if (ca.metrics.status != cb.metrics.status) return false;
    }
    if (ga.fitness_vector != gb.fitness_vector) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("fitness reproduces the published selection pressures") {
  const auto p1 = search::fitness(std::vector<double>{0.9, 0.1});
  CHECK(std::fabs(p1[0] / p1[1] - std::exp(0.8)) <= 1e-9);
  CHECK(p1[0] / p1[1] == doctest::Approx(2.2255).epsilon(1e-4));

  const auto p2 = search::fitness(std::vector<double>{-0.01, -10.0});
  CHECK(std::fabs(p2[0] / p2[1] - std::exp(9.99)) / std::exp(9.99) <= 1e-9);
  CHECK(p2[0] / p2[1] == doctest::Approx(21807.0).epsilon(1e-3));

  const auto p3 = search::fitness(std::vector<double>{7.0, 7.0, 7.0});
  for (double p : p3) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("fitness is shift invariant, normalized, and argmax preserving") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(10000));
    std::vector<double> L(n), shifted(n);
    const double c = rng.uniform() * 50 - 25;
    for (int i = 0; i < n; ++i) {
      L[i] = rng.uniform() * 200 - 100;
      shifted[i] = L[i] + c;
    }
    const auto p = search::fitness(L);
    const auto q = search::fitness(shifted);
    double sum = 0;
    int argmax_p = 0, argmax_l = 0;
    for (int i = 0; i < n; ++i) {
      sum += p[i];
      CHECK(p[i] >= 0.0);
      CHECK(std::fabs(p[i] - q[i]) <= 1e-12);
      if (p[i] > p[argmax_p]) argmax_p = i;
      if (L[i] > L[argmax_l]) argmax_l = i;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
    CHECK(argmax_p == argmax_l);
  }
  CHECK_THROWS_AS(search::fitness(std::vector<double>{}), EmptyPopulation);
}

TEST_CASE("select_parents follows the distribution") {
  Rng rng(9);
  const auto all_zero =
      search::select_parents(std::vector<double>{1.0, 0.0, 0.0}, 100, rng);
  for (int i : all_zero) CHECK(i == 0);

  std::vector<double> uniform(50, 0.02);
  std::vector<int> counts(50, 0);
  Rng rng2(10);
  for (int i : search::select_parents(uniform, 10000, rng2)) ++counts[i];
  for (int c : counts)
    CHECK(std::fabs(c / 10000.0 - 0.02) <= 0.005);

  Rng a(11), b(11);
  CHECK(search::select_parents(uniform, 100, a) ==
        search::select_parents(uniform, 100, b));
}

TEST_CASE("next_generation has the documented composition") {
  SearchConfig cfg;
  cfg.population = 50;
  cfg.elite = 5;
  cfg.random_inject = 10;
  cfg.offspring = 35;
  cfg.space_depth = 2;
  const GenerationRecord prev = [&] {
    std::vector<double> accs;
    Rng r(1);
    for (int i = 0; i < 50; ++i) accs.push_back(0.3 + 0.6 * r.uniform());
    return fake_generation(cfg, accs);
  }();

  Rng rng(12);
  const auto next = search::next_generation(prev, cfg, rng);
  REQUIRE(next.size() == 50);
  std::map<Origin, int> counts;
  for (const Candidate& c : next) ++counts[c.origin];
  CHECK(counts[Origin::kElite] == 5);
  CHECK(counts[Origin::kRandomInject] == 10);
  CHECK(counts[Origin::kOffspring] == 35);

  // Elites are the metric-sorted top of the previous generation, unchanged.
  std::vector<const Candidate*> sorted;
  for (const auto& c : prev.candidates) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [&](auto* a, auto* b) {
    const double ma = search::fitness_metric(a->metrics, cfg.fitness);
    const double mb = search::fitness_metric(b->metrics, cfg.fitness);
    if (ma != mb) return ma > mb;
    return a->id < b->id;
  });
  for (int e = 0; e < 5; ++e) CHECK(next[e].id == sorted[e]->id);

  for (const Candidate& c : next) CHECK(expr::depth(c.tree) == 2);

  SearchConfig bad = cfg;
  bad.offspring = 30;
  CHECK_THROWS_AS(search::next_generation(prev, bad, rng), ConfigError);
}

TEST_CASE("evolution runs deterministically with composition and caching") {
  const SearchConfig cfg = tiny_config();
  const SearchResult a = search::run_search(cfg, 1);
  const SearchResult b = search::run_search(cfg, 2);
  CHECK(results_identical(a, b));

  REQUIRE(a.history.size() == 3);
  for (const auto& gen : a.history) {
    CHECK(gen.candidates.size() == 6);
    double sum = 0;
    for (double p : gen.fitness_vector) sum += p;
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
  // Elites are never retrained.
  CHECK(a.trainings + a.cache_hits == 18);
  CHECK(a.trainings < 18);
  CHECK(a.cache_hits >= 2 * cfg.elite);

  // Monotone best-so-far in both metrics.
  for (std::size_t g = 1; g < a.history.size(); ++g) {
    CHECK(a.history[g].best_acc_so_far >= a.history[g - 1].best_acc_so_far);
    CHECK(a.history[g].best_loss_so_far <= a.history[g - 1].best_loss_so_far);
  }

  // Cache coherence: equal ids, equal metrics.
  std::map<std::string, std::pair<double, double>> seen;
  for (const auto& gen : a.history)
    for (const auto& c : gen.candidates) {
      const auto [it, fresh] = seen.emplace(
          c.id, std::make_pair(c.metrics.final_val_acc, c.metrics.final_val_loss));
      if (!fresh) {
        CHECK(it->second.first == c.metrics.final_val_acc);
        CHECK(it->second.second == c.metrics.final_val_loss);
      }
    }

  // Generation 1+ composition.
  for (std::size_t g = 1; g < a.history.size(); ++g) {
    std::map<Origin, int> counts;
    for (const auto& c : a.history[g].candidates) ++counts[c.origin];
    CHECK(counts[Origin::kElite] == 1);
    CHECK(counts[Origin::kRandomInject] == 2);
    CHECK(counts[Origin::kOffspring] == 3);
  }
}

TEST_CASE("seeded expressions join generation zero") {
  SearchConfig cfg = tiny_config();
  cfg.seed_exprs = {"mul(tanh(x), nmin(x))"};
  const SearchResult r = search::run_search(cfg, 1);
  CHECK(r.history[0].candidates[0].id == "mul(tanh(x), nmin(x))");
  CHECK(r.history[0].candidates[0].origin == Origin::kInitial);

  cfg.seed_exprs = {"add(id(mul(tanh(x), nmin(x))), id(mul(tanh(x), nmin(x))))"};
  CHECK_THROWS_AS(search::run_search(cfg, 1), ConfigError);  // depth 2 in S_1
}

TEST_CASE("a diverging candidate gets near-zero fitness and the run completes") {
  SearchConfig cfg = tiny_config();
  cfg.generations = 2;
  cfg.seed_exprs = {"diveps(cube(x), nmin(x))"};
  const SearchResult r = search::run_search(cfg, 2);
  const auto& gen0 = r.history[0];
  REQUIRE(gen0.candidates[0].id == "diveps(cube(x), nmin(x))");
  CHECK(gen0.candidates[0].metrics.status == nn::TrainStatus::kDiverged);
  CHECK(gen0.candidates[0].metrics.final_val_loss == cfg.train.divergence_loss_cap);
  CHECK(gen0.candidates[0].metrics.final_val_acc == 0.0);
  CHECK(gen0.fitness_vector[0] < 1e-6);
  CHECK(gen0.fitness_vector[0] > 0.0);
  CHECK(r.history.size() == 2);
}

TEST_CASE("random search samples fresh candidates each generation") {
  SearchConfig cfg = tiny_config();
  cfg.strategy = Strategy::kRandom;
  cfg.space_depth = 2;
  const SearchResult r = search::run_search(cfg, 2);
  CHECK(r.history.size() == 3);
  int total = 0;
  for (const auto& gen : r.history) {
    total += static_cast<int>(gen.candidates.size());
    for (const auto& c : gen.candidates) {
      CHECK(c.origin == Origin::kRandomInject);
      CHECK(expr::depth(c.tree) == 2);
    }
  }
  CHECK(total == 18);

  const SearchResult again = search::run_search(cfg, 1);
  CHECK(results_identical(r, again));
}

TEST_CASE("exhaustive search covers S_1 exactly once") {
  SearchConfig cfg = tiny_config();
  cfg.strategy = Strategy::kExhaustive;
  cfg.space_depth = 1;
  cfg.population = 500;  // block size for persistence
  cfg.train.epochs = 1;
  cfg.data.n_per_class = 40;
  cfg.data.val_per_class = 10;
  cfg.net.hidden_layers = {4};
  const SearchResult r = search::run_search(cfg, 2);

  std::set<std::string> ids;
  int total = 0;
  for (const auto& gen : r.history)
    for (const auto& c : gen.candidates) {
      ids.insert(c.id);
      ++total;
      CHECK(c.origin == Origin::kEnumerated);
    }
  CHECK(total == 3456);
  CHECK(ids.size() == 3456);

  std::set<std::string> expected;
  for (const auto& t : expr::enumerate_s1(cfg.alphabet()))
    expected.insert(expr::canonical_id(t));
  CHECK(ids == expected);

  const auto best = r.top(3);
  REQUIRE(best.size() == 3);
  CHECK(best[0].metrics.final_val_acc >= best[1].metrics.final_val_acc);
  CHECK(best[1].metrics.final_val_acc >= best[2].metrics.final_val_acc);
}

TEST_CASE("exhaustive search refuses S_2") {
  SearchConfig cfg = tiny_config();
  cfg.strategy = Strategy::kExhaustive;
  cfg.space_depth = 2;
  CHECK_THROWS_AS(search::run_search(cfg, 1), SpaceTooLarge);
}

TEST_CASE("top_k deduplicates and orders") {
  SearchResult r;
  GenerationRecord g;
  auto add = [&](const std::string& text, double acc, double loss) {
    Candidate c;
    c.tree = expr::parse_tree(text, expr::Alphabet{});
    c.id = text;
    c.metrics.final_val_acc = acc;
    c.metrics.final_val_loss = loss;
    g.candidates.push_back(std::move(c));
  };
  add("mul(tanh(x), nmin(x))", 0.9, 0.3);
  add("mul(tanh(x), nmin(x))", 0.9, 0.3);  // duplicate
  add("add(id(x), id(x))", 0.9, 0.2);      // same acc, lower loss
  add("mul(id(x), sigmoid(x))", 0.8, 0.5);
  g.fitness_vector = {0.25, 0.25, 0.25, 0.25};
  r.history.push_back(g);

  const auto top = search::top_k(r, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].id == "add(id(x), id(x))");
  CHECK(top[1].id == "mul(tanh(x), nmin(x))");
  CHECK(top[2].id == "mul(id(x), sigmoid(x))");

  const auto more = search::top_k(r, 10);
  CHECK(more.size() == 3);  // dedup leaves three
}

TEST_CASE("run ids are stable") {
  const SearchConfig cfg = tiny_config();
  CHECK(search::run_id_for(cfg) == search::run_id_for(cfg));
  SearchConfig other = cfg;
  other.master_seed = 123456;
  CHECK(search::run_id_for(cfg) != search::run_id_for(other));
}
