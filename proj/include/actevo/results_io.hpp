#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "actevo/search.hpp"

namespace actevo::io {

// One line per evaluated candidate, fields in this exact order:
// run_id, strategy, generation, slot, expr, origin, status, val_acc,
// val_loss, train_seconds, seed, extended_alphabet.
// train_seconds is the only field that may differ between identical runs.
nlohmann::ordered_json candidate_record(const std::string& run_id,
                                        const search::SearchConfig& cfg,
                                        int generation, int slot,
                                        const search::Candidate& c);

nlohmann::ordered_json header_record(const search::SearchConfig& cfg,
                                     const std::string& run_id);

struct Manifest {
  std::string run_id;
  std::string config_digest;
  std::string strategy;
  int total_generations = 0;
  int completed_generations = 0;
  std::string results_file = "results.jsonl";
};

void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

// Number of generation blocks a strategy will produce (exhaustive chunks
// the enumeration into population-sized blocks).
int total_generations(const search::SearchConfig& cfg);

// Streams candidate records to a JSONL file. Records are buffered per
// generation and always flushed in slot order, so the bytes on disk do not
// depend on evaluation concurrency; the contiguous slot prefix is flushed
// as soon as it exists, which keeps partial progress on disk. The manifest
// advances only at generation barriers.
class JsonlWriter : public search::RecordSink {
 public:
  JsonlWriter(std::string results_path, std::string manifest_path,
              const search::SearchConfig& cfg, const std::string& config_digest,
              bool append, int completed_generations);
  ~JsonlWriter() override;

  void on_header(const search::SearchConfig& cfg, const std::string& run_id) override;
  void on_candidate(int generation, int slot, const search::Candidate& c) override;
  void on_generation_complete(int generation) override;

 private:
  void flush_ready();

  std::string results_path_;
  std::string manifest_path_;
  search::SearchConfig cfg_;
  std::string digest_;
  std::string run_id_;
  bool append_;
  int completed_;
  int next_slot_ = 0;
  std::map<int, std::string> pending_;  // slot -> serialized line
  FILE* file_ = nullptr;
};

struct LoadedResults {
  nlohmann::json header;  // contents of the run_header object
  struct Row {
    int generation;
    int slot;
    std::string expr;
    std::string origin;
    std::string status;
    double val_acc;
    double val_loss;
    std::uint64_t seed;
    std::string raw_line;
  };
  std::vector<Row> rows;
  std::string header_line;
};

LoadedResults load_results(const std::string& path);

// Builds the resume state from persisted rows (generations before
// `completed` only) and rewrites the results file to exactly those rows,
// preserving the original bytes.
search::ResumeState make_resume_state(const LoadedResults& results, int completed,
                                      const std::string& rewrite_path,
                                      const search::SearchConfig& cfg);

}  // namespace actevo::io
