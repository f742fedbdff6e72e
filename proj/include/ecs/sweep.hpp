#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ecs/attention_analysis.hpp"
#include "ecs/datasets.hpp"
#include "ecs/evaluation.hpp"
#include "ecs/pipeline.hpp"
#include "ecs/prompt.hpp"
#include "ecs/svg.hpp"
#include "ecs/tokenizer.hpp"
#include "ecs/weights_io.hpp"

namespace ecs {

namespace fs = std::filesystem;

inline const std::vector<std::size_t> kDefaultCountGrid = {0, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192};

struct DatasetSpec {
  std::string name;             // output subdirectory
  TaskKind kind = TaskKind::MultipleChoice;
  std::optional<fs::path> path;  // file-backed
  std::size_t synthetic_n = 0;   // synthetic when path is empty; samples depend on the seed
};

struct SweepConfig {
  std::vector<fs::path> weights;  // ordered checkpoints
  std::vector<DatasetSpec> datasets;
  std::optional<fs::path> vocab;
  std::optional<fs::path> prompt_template;
  std::map<FillerKind, std::string> filler_aliases;  // kind -> vocabulary string
  std::vector<FillerKind> kinds = {FillerKind::Space};
  std::vector<std::size_t> counts = kDefaultCountGrid;
  std::vector<FillerPosition> positions = {FillerPosition::BeforeAnswerCue};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool capture_attention = false;
  bool capture_heatmaps = false;
  std::size_t max_new_tokens = 16;
  fs::path output_dir = "ecs_out";
};

inline void validate_sweep_config(const SweepConfig& c) {
  if (c.weights.empty()) fail(ErrorCode::ConfigError, "config lists no weight files");
  if (c.datasets.empty()) fail(ErrorCode::ConfigError, "config lists no datasets");
  if (c.kinds.empty()) fail(ErrorCode::ConfigError, "config lists no filler kinds");
  if (c.positions.empty()) fail(ErrorCode::ConfigError, "config lists no positions");
  if (c.seeds.empty()) fail(ErrorCode::ConfigError, "seeds must be nonempty");
  if (std::find(c.counts.begin(), c.counts.end(), 0) == c.counts.end())
    fail(ErrorCode::ConfigError, "count grid must contain 0 (the baseline)");
  std::set<std::string> names;
  for (const auto& d : c.datasets)
    if (!names.insert(d.name).second) fail(ErrorCode::ConfigError, "duplicate dataset name " + d.name);
}

// Relative paths are resolved against `base` (the config file's directory).
inline SweepConfig sweep_config_from_json(const nlohmann::json& j, const fs::path& base = {}) {
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  SweepConfig c;
  try {
    for (const auto& w : j.at("weights")) c.weights.push_back(resolve(w.get<std::string>()));
    for (const auto& d : j.at("datasets")) {
      DatasetSpec ds;
      ds.kind = parse_task_kind(d.value("kind", std::string("multiple_choice")));
      if (d.contains("path")) {
        ds.path = resolve(d["path"].get<std::string>());
        ds.name = d.value("name", ds.path->stem().string());
      } else if (d.contains("synthetic")) {
        ds.synthetic_n = d["synthetic"].get<std::size_t>();
        if (ds.synthetic_n == 0) fail(ErrorCode::ConfigError, "synthetic sample count must be >= 1");
        ds.name = d.value("name", "synthetic_" + std::string(to_string(ds.kind)));
      } else {
        fail(ErrorCode::ConfigError, "dataset entries need 'path' or 'synthetic'");
      }
      c.datasets.push_back(std::move(ds));
    }
    if (j.contains("vocab")) c.vocab = resolve(j["vocab"].get<std::string>());
    if (j.contains("template")) c.prompt_template = resolve(j["template"].get<std::string>());
    if (j.contains("filler_aliases"))
      for (const auto& [k, v] : j["filler_aliases"].items()) c.filler_aliases[parse_filler_kind(k)] = v.get<std::string>();
    if (j.contains("filler_kinds")) {
      c.kinds.clear();
      for (const auto& k : j["filler_kinds"]) c.kinds.push_back(parse_filler_kind(k.get<std::string>()));
    }
    if (j.contains("counts")) c.counts = j["counts"].get<std::vector<std::size_t>>();
    if (j.contains("positions")) {
      c.positions.clear();
      for (const auto& p : j["positions"]) c.positions.push_back(parse_filler_position(p.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("capture")) {
      c.capture_attention = j["capture"].value("attention_stats", false);
      c.capture_heatmaps = j["capture"].value("heatmaps", false);
    }
    c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("sweep config: ") + e.what());
  }
  validate_sweep_config(c);
  return c;
}

inline SweepConfig load_sweep_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return sweep_config_from_json(j, path.parent_path());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Vocabulary and template named by the config, or the built-in defaults.
inline Vocabulary resolve_vocabulary(const SweepConfig& c) {
  Vocabulary v = c.vocab ? load_vocabulary(*c.vocab) : default_vocabulary();
  for (const auto& [kind, text] : c.filler_aliases) {
    auto id = v.find(text);
    if (!id) fail(ErrorCode::ConfigError, "filler alias target '" + text + "' is not in the vocabulary");
    v = v.with_filler_alias(kind, *id);
  }
  return v;
}

inline PromptTemplate resolve_template(const SweepConfig& c) {
  return c.prompt_template ? load_template(*c.prompt_template) : PromptTemplate{};
}

inline Checkpoint load_checked_checkpoint(const fs::path& path, const Vocabulary& vocab) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.config.vocab_size() != vocab.size())
    fail(ErrorCode::WeightError, path.string() + ": vocab_size " + std::to_string(ck.config.vocab_size()) +
                                     " does not match vocabulary size " + std::to_string(vocab.size()));
  return ck;
}

// Samples for one seed. File datasets ignore the seed.
inline std::vector<TaskSample> dataset_samples(const DatasetSpec& d, std::uint64_t seed) {
  if (d.path) {
    LoadReport r = load_samples(*d.path, d.kind);
    if (!r.ok()) {
      const auto& first = r.issues.front();
      fail(first.code, d.path->string() + ":" + std::to_string(first.line) + ": " + first.message);
    }
    return std::move(r.samples);
  }
  return generate_synthetic(seed, d.synthetic_n, d.kind);
}

// ---------------------------------------------------------------------------
// Grid execution
// ---------------------------------------------------------------------------

struct Cell {
  FillerSpec filler;
  std::uint64_t seed = 0;

  std::string key() const {
    return std::string(to_string(filler.kind)) + "_M" + std::to_string(filler.count) + "_" +
           std::string(to_string(filler.position)) + "_s" + std::to_string(seed);
  }
};

// Cells in canonical order: kind, position, count, seed.
inline std::vector<Cell> grid_cells(const SweepConfig& c) {
  std::vector<std::size_t> counts = c.counts;
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
  std::vector<Cell> cells;
  for (FillerKind k : c.kinds)
    for (FillerPosition p : c.positions)
      for (std::size_t m : counts)
        for (std::uint64_t s : c.seeds) cells.push_back({{k, m, p}, s});
  return cells;
}

struct RunOptions {
  std::size_t workers = 0;        // 0 = hardware concurrency
  std::ostream* log = &std::cerr;  // may be null
};

// ECS_WORKERS overrides the requested worker count.
inline std::size_t effective_workers(std::size_t requested) {
  if (const char* env = std::getenv("ECS_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

struct GridResult {
  fs::path output_dir;
  std::size_t records = 0;
  std::size_t computed_cells = 0;
  std::size_t reused_cells = 0;
  std::vector<std::string> skipped_cells;
  std::vector<std::string> failed_cells;
  AggregateReport report;

  bool ok() const noexcept { return failed_cells.empty(); }
};

inline constexpr std::string_view kManifestName = "manifest.jsonl";
inline constexpr std::string_view kRecordsName = "records.jsonl";
inline constexpr std::string_view kAggregateName = "aggregate.csv";

namespace detail {

inline void write_atomically(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_text_file(tmp, content);
  fs::rename(tmp, path);
}

struct ManifestEntry {
  std::string status;
  std::string config_hash;
};

inline std::map<std::string, ManifestEntry> read_manifest(const fs::path& path) {
  std::map<std::string, ManifestEntry> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out[j.at("cell").get<std::string>()] = {j.at("status").get<std::string>(), j.at("config_hash").get<std::string>()};
    } catch (const nlohmann::json::exception&) {
      // A torn final line from an interrupted run; the cell is simply recomputed.
    }
  }
  return out;
}

inline void log_line(const RunOptions& opt, const std::string& msg) {
  static std::mutex mu;
  if (!opt.log) return;
  std::lock_guard lock(mu);
  *opt.log << msg << '\n';
}

}  // namespace detail

// Content hash of everything that determines a cell's records other than
// its coordinates.
inline std::string config_hash(const std::string& weight_bytes, const Vocabulary& vocab, const PromptTemplate& tmpl,
                               const DatasetSpec& d, std::size_t max_new_tokens) {
  std::uint64_t h = fnv1a(weight_bytes);
  h = fnv1a(format_vocabulary(vocab), h);
  for (FillerKind k : kAllFillerKinds) h = fnv1a(std::to_string(vocab.filler_id(k).value_or(~0u)) + ";", h);
  h = fnv1a(template_to_json(tmpl).dump(), h);
  h = fnv1a(std::string(to_string(d.kind)), h);
  h = fnv1a(d.path ? read_file(*d.path) : "synthetic:" + std::to_string(d.synthetic_n), h);
  h = fnv1a("max_new=" + std::to_string(max_new_tokens), h);
  return hex64(h);
}

// Evaluates every grid cell of one dataset against one checkpoint, resuming
// from `out_dir`'s manifest, then writes records.jsonl and aggregate.csv.
inline GridResult run_dataset_grid(const SweepConfig& config, const DatasetSpec& dataset, const fs::path& weights_path,
                                   const fs::path& out_dir, const RunOptions& opt = {}) {
  const Vocabulary vocab = resolve_vocabulary(config);
  const PromptTemplate tmpl = resolve_template(config);
  const Checkpoint ck = load_checked_checkpoint(weights_path, vocab);
  const std::string hash = config_hash(read_file(weights_path), vocab, tmpl, dataset, config.max_new_tokens);
  const EvalContext ctx{ck.config, ck.weights, vocab, tmpl, config.max_new_tokens};

  fs::create_directories(out_dir / "cells");
  if (config.capture_attention || config.capture_heatmaps) fs::create_directories(out_dir / "attention");

  std::map<std::uint64_t, std::vector<TaskSample>> samples;
  for (std::uint64_t s : config.seeds) samples[s] = dataset_samples(dataset, s);

  GridResult result;
  result.output_dir = out_dir;
  const std::vector<Cell> cells = grid_cells(config);

  // A (kind, M, position) group is skipped as a whole when any of its
  // prompts, under any seed, exceeds max_context.
  std::set<std::string> skipped_groups;
  auto group_of = [](const Cell& c) {
    return std::string(to_string(c.filler.kind)) + "/" + std::to_string(c.filler.count) + "/" +
           std::string(to_string(c.filler.position));
  };
  for (const Cell& c : cells) {
    if (skipped_groups.contains(group_of(c))) continue;
    for (const auto& sample : samples[c.seed]) {
      PromptTokens p = assemble_baseline(sample, tmpl, vocab);
      if (p.tokens.size() + c.filler.count > ck.config.max_context()) {
        skipped_groups.insert(group_of(c));
        detail::log_line(opt, "skip " + c.key() + ": sample " + sample.id + " exceeds max_context " +
                                  std::to_string(ck.config.max_context()));
        break;
      }
    }
  }

  const fs::path manifest_path = out_dir / kManifestName;
  const auto manifest = detail::read_manifest(manifest_path);
  std::ofstream manifest_out(manifest_path, std::ios::app);
  if (!manifest_out) fail(ErrorCode::IoError, "cannot append to " + manifest_path.string());
  std::mutex manifest_mu;
  auto append_manifest = [&](const Cell& c, std::string_view status, std::size_t n) {
    nlohmann::ordered_json j;
    j["cell"] = c.key();
    j["kind"] = to_string(c.filler.kind);
    j["M"] = c.filler.count;
    j["position"] = to_string(c.filler.position);
    j["seed"] = c.seed;
    j["config_hash"] = hash;
    j["status"] = status;
    j["records"] = n;
    std::lock_guard lock(manifest_mu);
    manifest_out << j.dump() << '\n';
    manifest_out.flush();
  };

  std::vector<const Cell*> pending;
  for (const Cell& c : cells) {
    if (skipped_groups.contains(group_of(c))) {
      result.skipped_cells.push_back(c.key());
      auto it = manifest.find(c.key());
      if (it == manifest.end() || it->second.status != "skipped" || it->second.config_hash != hash)
        append_manifest(c, "skipped", 0);
      continue;
    }
    auto it = manifest.find(c.key());
    const bool done = it != manifest.end() && it->second.status == "done" && it->second.config_hash == hash &&
                      fs::exists(out_dir / "cells" / (c.key() + ".jsonl"));
    if (done)
      ++result.reused_cells;
    else
      pending.push_back(&c);
  }

  auto run_cell = [&](const Cell& c) {
    std::string body;
    for (const auto& sample : samples.at(c.seed))
      body += record_to_json(evaluate_sample(sample, c.filler, ctx, c.seed).record).dump() + "\n";

    if (c.filler.count > 0 && (config.capture_attention || config.capture_heatmaps)) {
      const auto& sample = samples.at(c.seed).front();
      const PromptTokens prompt = assemble(sample, c.filler, tmpl, vocab, ck.config.max_context());
      const ForwardResult fr = forward(prompt.tokens, ck.config, ck.weights, {.hidden_states = false, .attentions = true});
      if (config.capture_attention)
        detail::write_atomically(out_dir / "attention" / (c.key() + ".csv"),
                                 format_region_stats_csv(region_stats(*fr.attentions, prompt, vocab)));
      if (config.capture_heatmaps) {
        const fs::path dir = out_dir / "attention" / c.key();
        fs::create_directories(dir);
        for (std::size_t l = 0; l < fr.attentions->size(); ++l)
          for (std::size_t h = 0; h < (*fr.attentions)[l].size(); ++h)
            render_heatmap((*fr.attentions)[l][h], prompt, l, h, dir / heatmap_filename(l, h));
      }
    }
    detail::write_atomically(out_dir / "cells" / (c.key() + ".jsonl"), body);
    append_manifest(c, "done", samples.at(c.seed).size());
  };

  std::atomic<std::size_t> next{0};
  std::mutex failed_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      const Cell& c = *pending[i];
      try {
        run_cell(c);
      } catch (const std::exception& e) {
        detail::log_line(opt, "cell " + c.key() + " failed: " + e.what());
        std::lock_guard lock(failed_mu);
        result.failed_cells.push_back(c.key());
      }
    }
  };
  const std::size_t nworkers = std::min(effective_workers(opt.workers), std::max<std::size_t>(1, pending.size()));
  if (nworkers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < nworkers; ++w) pool.emplace_back(worker);
  }
  result.computed_cells = pending.size() - result.failed_cells.size();
  std::sort(result.failed_cells.begin(), result.failed_cells.end());

  // Barrier passed: gather in canonical cell order.
  std::string all;
  std::vector<RunRecord> records;
  for (const Cell& c : cells) {
    if (skipped_groups.contains(group_of(c))) continue;
    const fs::path p = out_dir / "cells" / (c.key() + ".jsonl");
    if (!fs::exists(p)) continue;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      all += line + "\n";
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    }
  }
  result.records = records.size();
  detail::write_atomically(out_dir / kRecordsName, all);
  if (!records.empty() && result.failed_cells.empty()) {
    result.report = aggregate(records);
    detail::write_atomically(out_dir / kAggregateName, format_aggregate_csv(result.report));
  } else if (records.empty()) {
    detail::write_atomically(out_dir / kAggregateName, std::string(kAggregateHeader) + "\n");
  }
  return result;
}

// `ecs run`: the final (last listed) checkpoint over every dataset.
inline std::vector<GridResult> run_grid(const SweepConfig& config, const RunOptions& opt = {}) {
  validate_sweep_config(config);
  std::vector<GridResult> out;
  for (const auto& d : config.datasets)
    out.push_back(run_dataset_grid(config, d, config.weights.back(), config.output_dir / d.name, opt));
  return out;
}

struct SweepResult {
  std::vector<std::vector<GridResult>> per_checkpoint;  // [checkpoint][dataset]
  std::vector<fs::path> aggregate_csvs;                 // one per dataset
  bool ok = true;
};

inline constexpr std::string_view kCheckpointAggregateName = "checkpoint_aggregate.csv";

// Runs the grid once per listed checkpoint and writes, per dataset, one
// aggregate row per (checkpoint, grid cell group) with the checkpoint index
// in a leading column.
inline SweepResult checkpoint_sweep(const SweepConfig& config, const RunOptions& opt = {}) {
  validate_sweep_config(config);
  if (config.weights.size() < 2) fail(ErrorCode::PreconditionError, "checkpoint sweep needs at least 2 checkpoints");
  const Vocabulary vocab = resolve_vocabulary(config);
  for (const auto& w : config.weights) (void)load_checked_checkpoint(w, vocab);

  SweepResult result;
  for (std::size_t i = 0; i < config.weights.size(); ++i) {
    std::vector<GridResult> runs;
    for (const auto& d : config.datasets) {
      runs.push_back(run_dataset_grid(config, d, config.weights[i],
                                      config.output_dir / ("ckpt_" + std::to_string(i)) / d.name, opt));
      result.ok = result.ok && runs.back().ok();
    }
    result.per_checkpoint.push_back(std::move(runs));
  }
  for (std::size_t d = 0; d < config.datasets.size(); ++d) {
    AggregateReport combined;
    for (std::size_t i = 0; i < config.weights.size(); ++i)
      for (AggregateRow row : result.per_checkpoint[i][d].report.rows) {
        row.checkpoint = std::to_string(i);
        combined.rows.push_back(row);
      }
    const fs::path dir = config.output_dir / config.datasets[d].name;
    fs::create_directories(dir);
    const fs::path csv = dir / kCheckpointAggregateName;
    detail::write_atomically(csv, format_aggregate_csv(combined));
    result.aggregate_csvs.push_back(csv);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Plots
// ---------------------------------------------------------------------------

struct CsvRow {
  std::optional<std::size_t> checkpoint;
  std::string kind;
  std::size_t count = 0;
  std::string position;
  double accuracy = 0.0;
  double baseline = 0.0;
};

inline std::vector<CsvRow> parse_aggregate_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) return rows;
  const bool with_ckpt = line.starts_with("checkpoint,");
  if (line != (with_ckpt ? "checkpoint," + std::string(kAggregateHeader) : std::string(kAggregateHeader)))
    fail(ErrorCode::ConfigError, "unrecognized aggregate CSV header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    const std::size_t o = with_ckpt ? 1 : 0;
    if (f.size() != 8 + o) fail(ErrorCode::RecordError, "aggregate CSV line " + std::to_string(line_no) + " malformed");
    try {
      CsvRow r;
      if (with_ckpt) r.checkpoint = std::stoul(f[0]);
      r.kind = f[o];
      r.count = std::stoul(f[o + 1]);
      r.position = f[o + 2];
      r.accuracy = std::stod(f[o + 4]);
      r.baseline = std::stod(f[o + 5]);
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      fail(ErrorCode::RecordError, "aggregate CSV line " + std::to_string(line_no) + " malformed");
    }
  }
  return rows;
}

struct Series {
  std::string name;
  std::vector<std::pair<std::size_t, double>> points;  // (x tick index, accuracy)
};

inline constexpr std::array<std::string_view, 8> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string render_line_chart(const std::string& title, const std::string& x_label,
                                     const std::vector<std::string>& ticks, const std::vector<Series>& series) {
  const double width = 640, height = 400, left = 60, right = 140, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  double lo = 100.0, hi = 0.0;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  lo = std::max(0.0, std::floor(lo - 1.0));
  hi = std::min(100.0, std::ceil(hi + 1.0));
  if (hi <= lo) hi = lo + 1.0;

  auto px = [&](std::size_t i) {
    return ticks.size() <= 1 ? left + pw / 2 : left + pw * static_cast<double>(i) / static_cast<double>(ticks.size() - 1);
  };
  auto py = [&](double y) { return top + ph * (1.0 - (y - lo) / (hi - lo)); };

  SvgWriter svg(width, height);
  svg.rect(0, 0, width, height, "#ffffff");
  svg.text(left, top - 16, title, 14);
  svg.line(left, top + ph, left + pw, top + ph, "#000000", 1.0);
  svg.line(left, top, left, top + ph, "#000000", 1.0);
  for (std::size_t i = 0; i < ticks.size(); ++i) svg.text(px(i), top + ph + 16, ticks[i], 10, "middle");
  svg.text(left + pw / 2, height - 10, x_label, 12, "middle");
  for (int k = 0; k <= 4; ++k) {
    const double y = lo + (hi - lo) * k / 4.0;
    svg.text(left - 6, py(y) + 4, fixed(y, 1), 10, "end");
  }
  svg.text(14, top + ph / 2, "accuracy (%)", 12, "middle");

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto color = kPalette[s % kPalette.size()];
    std::vector<std::pair<double, double>> pts;
    for (const auto& [x, y] : series[s].points) pts.emplace_back(px(x), py(y));
    svg.polyline(pts, color, "series");
    for (const auto& [x, y] : pts) svg.circle(x, y, 3, color);
    svg.text(left + pw + 12, top + 16 * static_cast<double>(s + 1), series[s].name, 11);
  }
  return svg.finish();
}

// Accuracy-vs-M per position (one polyline per filler kind); for checkpoint
// CSVs additionally accuracy-vs-checkpoint per (kind, position) with the
// baseline and one curve per filler count. Returns the files written.
inline std::vector<fs::path> emit_plots(const fs::path& csv_path, const fs::path& out_dir) {
  const auto rows = parse_aggregate_csv(read_file(csv_path));
  if (rows.empty()) fail(ErrorCode::NoData, csv_path.string() + " has no data rows");
  fs::create_directories(out_dir);
  std::vector<fs::path> written;

  const bool with_ckpt = rows.front().checkpoint.has_value();
  std::size_t last_ckpt = 0;
  for (const auto& r : rows) last_ckpt = std::max(last_ckpt, r.checkpoint.value_or(0));

  std::vector<std::string> positions, kinds;
  auto remember = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : rows) {
    remember(positions, r.position);
    remember(kinds, r.kind);
  }

  for (const auto& pos : positions) {
    std::set<std::size_t> counts;
    for (const auto& r : rows)
      if (r.position == pos && r.checkpoint.value_or(0) == last_ckpt) counts.insert(r.count);
    const std::vector<std::size_t> grid(counts.begin(), counts.end());
    std::vector<std::string> ticks;
    for (std::size_t m : grid) ticks.push_back(std::to_string(m));
    std::vector<Series> series;
    for (const auto& kind : kinds) {
      Series s{kind, {}};
      for (const auto& r : rows)
        if (r.kind == kind && r.position == pos && r.checkpoint.value_or(0) == last_ckpt)
          s.points.emplace_back(std::lower_bound(grid.begin(), grid.end(), r.count) - grid.begin(), r.accuracy);
      std::sort(s.points.begin(), s.points.end());
      if (!s.points.empty()) series.push_back(std::move(s));
    }
    const fs::path p = out_dir / ("accuracy_vs_M_" + pos + ".svg");
    write_text_file(p, render_line_chart("Accuracy vs filler count (" + pos + ")", "filler tokens M", ticks, series));
    written.push_back(p);
  }

  if (with_ckpt) {
    std::vector<std::string> ticks;
    for (std::size_t i = 0; i <= last_ckpt; ++i) ticks.push_back(std::to_string(i));
    for (const auto& kind : kinds)
      for (const auto& pos : positions) {
        std::map<std::size_t, Series> by_count;
        Series base{"baseline (M=0)", {}};
        for (const auto& r : rows) {
          if (r.kind != kind || r.position != pos) continue;
          if (r.count == 0) {
            base.points.emplace_back(*r.checkpoint, r.accuracy);
          } else {
            auto& s = by_count[r.count];
            s.name = "M=" + std::to_string(r.count);
            s.points.emplace_back(*r.checkpoint, r.accuracy);
          }
        }
        std::vector<Series> series;
        if (!base.points.empty()) series.push_back(std::move(base));
        for (auto& [m, s] : by_count) series.push_back(std::move(s));
        for (auto& s : series) std::sort(s.points.begin(), s.points.end());
        const fs::path p = out_dir / ("accuracy_vs_checkpoint_" + kind + "_" + pos + ".svg");
        write_text_file(p, render_line_chart("Accuracy vs checkpoint (" + kind + ", " + pos + ")", "checkpoint", ticks, series));
        written.push_back(p);
      }
  }
  return written;
}

}  // namespace ecs
