#include "actevo/results_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "actevo/config.hpp"
#include "actevo/errors.hpp"
#include "actevo/expr.hpp"

namespace actevo::io {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json candidate_record(const std::string& run_id,
                              const search::SearchConfig& cfg, int generation,
                              int slot, const search::Candidate& c) {
  ordered_json j;
  j["run_id"] = run_id;
  j["strategy"] = search::to_string(cfg.strategy);
  j["generation"] = generation;
  j["slot"] = slot;
  j["expr"] = c.id;
  j["origin"] = search::to_string(c.origin);
  j["status"] = c.metrics.status == nn::TrainStatus::kCompleted ? "completed"
                                                                : "diverged";
  j["val_acc"] = c.metrics.final_val_acc;
  j["val_loss"] = c.metrics.final_val_loss;
  j["train_seconds"] = c.train_seconds;
  j["seed"] = c.seed;
  j["extended_alphabet"] = cfg.extended_alphabet;
  return j;
}

ordered_json header_record(const search::SearchConfig& cfg,
                           const std::string& run_id) {
  ordered_json inner;
  inner["run_id"] = run_id;
  inner["strategy"] = search::to_string(cfg.strategy);
  inner["config_digest"] = config::digest(cfg);
  inner["elite_metrics_carried_over"] = true;
  const ordered_json full = config::to_json(cfg);
  ordered_json config_only;
  for (const char* key : {"search", "train", "net", "data"})
    config_only[key] = full.at(key);
  inner["config"] = config_only;
  inner["policy"] = full.at("policy");
  ordered_json j;
  j["run_header"] = inner;
  return j;
}

void write_manifest(const std::string& path, const Manifest& m) {
  ordered_json j;
  j["run_id"] = m.run_id;
  j["config_digest"] = m.config_digest;
  j["strategy"] = m.strategy;
  j["total_generations"] = m.total_generations;
  j["completed_generations"] = m.completed_generations;
  j["results"] = m.results_file;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ResumeMismatch("no manifest at '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ResumeMismatch("manifest is not valid JSON: " + std::string(e.what()));
  }
  Manifest m;
  m.run_id = j.at("run_id");
  m.config_digest = j.at("config_digest");
  m.strategy = j.at("strategy");
  m.total_generations = j.at("total_generations");
  m.completed_generations = j.at("completed_generations");
  m.results_file = j.at("results");
  return m;
}

int total_generations(const search::SearchConfig& cfg) {
  if (cfg.strategy != search::Strategy::kExhaustive) return cfg.generations;
  const int space = expr::kBinaryCount * cfg.alphabet().unary_count() *
                    cfg.alphabet().unary_count();
  return (space + cfg.population - 1) / cfg.population;
}

JsonlWriter::JsonlWriter(std::string results_path, std::string manifest_path,
                         const search::SearchConfig& cfg,
                         const std::string& config_digest, bool append,
                         int completed_generations)
    : results_path_(std::move(results_path)),
      manifest_path_(std::move(manifest_path)),
      cfg_(cfg),
      digest_(config_digest),
      append_(append),
      completed_(completed_generations) {
  file_ = std::fopen(results_path_.c_str(), append ? "ab" : "wb");
  if (file_ == nullptr)
    throw ConfigError("cannot open results file '" + results_path_ + "'");
}

JsonlWriter::~JsonlWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void JsonlWriter::on_header(const search::SearchConfig& cfg,
                            const std::string& run_id) {
  run_id_ = run_id;
  if (!append_) {
    const std::string line = header_record(cfg, run_id).dump() + "\n";
    std::fwrite(line.data(), 1, line.size(), file_);
    std::fflush(file_);
  }
  Manifest m;
  m.run_id = run_id;
  m.config_digest = digest_;
  m.strategy = search::to_string(cfg.strategy);
  m.total_generations = total_generations(cfg);
  m.completed_generations = completed_;
  write_manifest(manifest_path_, m);
}

void JsonlWriter::on_candidate(int generation, int slot,
                               const search::Candidate& c) {
  pending_[slot] =
      candidate_record(run_id_, cfg_, generation, slot, c).dump() + "\n";
  flush_ready();
}

void JsonlWriter::flush_ready() {
  // Emit the contiguous slot prefix so partially evaluated generations
  // survive an interruption in a well-defined order.
  auto it = pending_.find(next_slot_);
  while (it != pending_.end()) {
    std::fwrite(it->second.data(), 1, it->second.size(), file_);
    pending_.erase(it);
    ++next_slot_;
    it = pending_.find(next_slot_);
  }
  std::fflush(file_);
}

void JsonlWriter::on_generation_complete(int generation) {
  flush_ready();
  if (!pending_.empty())
    throw std::logic_error("generation completed with non-contiguous slots");
  next_slot_ = 0;
  Manifest m;
  m.run_id = run_id_;
  m.config_digest = digest_;
  m.strategy = search::to_string(cfg_.strategy);
  m.total_generations = total_generations(cfg_);
  m.completed_generations = generation + 1;
  write_manifest(manifest_path_, m);
}

LoadedResults load_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ResumeMismatch("no results file at '" + path + "'");
  LoadedResults out;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      // A torn trailing line from an interrupted write is expected; stop
      // there. Anything after it would be unreachable anyway.
      break;
    }
    if (j.contains("run_header")) {
      out.header = j.at("run_header");
      out.header_line = line;
      have_header = true;
      continue;
    }
    LoadedResults::Row row;
    try {
      row.generation = j.at("generation");
      row.slot = j.at("slot");
      row.expr = j.at("expr");
      row.origin = j.at("origin");
      row.status = j.at("status");
      row.val_acc = j.at("val_acc");
      row.val_loss = j.at("val_loss");
      row.seed = j.at("seed");
    } catch (const json::exception& e) {
      throw ResumeMismatch("results line " + std::to_string(lineno) +
                           " is malformed: " + e.what());
    }
    row.raw_line = line;
    out.rows.push_back(std::move(row));
  }
  if (!have_header)
    throw ResumeMismatch("results file has no run_header record");
  return out;
}

namespace {

search::Origin origin_from_string(const std::string& s) {
  if (s == "initial") return search::Origin::kInitial;
  if (s == "elite") return search::Origin::kElite;
  if (s == "random_inject") return search::Origin::kRandomInject;
  if (s == "offspring") return search::Origin::kOffspring;
  if (s == "enumerated") return search::Origin::kEnumerated;
  throw ResumeMismatch("unknown origin '" + s + "' in results file");
}

}  // namespace

search::ResumeState make_resume_state(const LoadedResults& results,
                                      int completed,
                                      const std::string& rewrite_path,
                                      const search::SearchConfig& cfg) {
  search::ResumeState state;
  state.completed_generations = completed;

  const std::string tmp = rewrite_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    out << results.header_line << "\n";
    for (const auto& row : results.rows) {
      if (row.generation >= completed) continue;
      out << row.raw_line << "\n";
      search::ResumeState::Row r;
      r.generation = row.generation;
      r.slot = row.slot;
      r.expr = row.expr;
      r.origin = origin_from_string(row.origin);
      r.seed = row.seed;
      r.metrics.final_val_acc = row.val_acc;
      r.metrics.final_val_loss = row.val_loss;
      r.metrics.status = row.status == "diverged" ? nn::TrainStatus::kDiverged
                                                  : nn::TrainStatus::kCompleted;
      state.rows.push_back(std::move(r));
    }
  }
  std::filesystem::rename(tmp, rewrite_path);
  return state;
}

}  // namespace actevo::io
