#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "ecs/ecs.hpp"

namespace fs = std::filesystem;

namespace {

struct PromptArgs {
  std::string data;
  std::string kind = "multiple_choice";
  std::string sample;
  std::string filler = "space:0:before";
  std::string vocab;
  std::string tmpl;
};

void add_prompt_options(CLI::App* cmd, PromptArgs& a) {
  cmd->add_option("--data", a.data, "Line-delimited JSON samples")->required()->check(CLI::ExistingFile);
  cmd->add_option("--kind", a.kind, "multiple_choice|free_form_math (or mc|math)");
  cmd->add_option("--sample", a.sample, "Sample id (default: first sample)");
  cmd->add_option("--filler", a.filler, "kind:M:position, e.g. period:16:before");
  cmd->add_option("--vocab", a.vocab, "Vocabulary file (default: built-in 512 entries)")->check(CLI::ExistingFile);
  cmd->add_option("--template", a.tmpl, "Prompt template JSON")->check(CLI::ExistingFile);
}

ecs::Vocabulary vocab_from(const std::string& path) {
  return path.empty() ? ecs::default_vocabulary() : ecs::load_vocabulary(path);
}

ecs::PromptTemplate template_from(const std::string& path) {
  return path.empty() ? ecs::PromptTemplate{} : ecs::load_template(path);
}

ecs::TaskSample pick_sample(const PromptArgs& a) {
  const auto report = ecs::load_samples(a.data, ecs::parse_task_kind(a.kind));
  for (const auto& s : report.samples)
    if (a.sample.empty() || s.id == a.sample) return s;
  ecs::fail(ecs::ErrorCode::ConfigError,
            a.sample.empty() ? a.data + " has no valid samples" : "no sample with id '" + a.sample + "'");
}

std::string span_text(const ecs::Span& s) {
  return "[" + std::to_string(s.begin) + ", " + std::to_string(s.end) + ")";
}

int cmd_dump_prompt(const PromptArgs& a) {
  const auto vocab = vocab_from(a.vocab);
  const auto sample = pick_sample(a);
  const auto p = ecs::assemble(sample, ecs::parse_filler_spec(a.filler), template_from(a.tmpl), vocab);
  std::cout << "sample      " << sample.id << "\n"
            << "tokens      " << p.tokens.size() << " (base " << p.base_length << ")\n"
            << "answer_cue  " << p.answer_cue_index << "\n"
            << "ecs         " << span_text(p.ecs) << "\n"
            << "question    " << span_text(p.question) << "\n";
  if (p.context) std::cout << "context     " << span_text(*p.context) << "\n";
  for (const auto& o : p.options) std::cout << "option " << o.label << "    " << span_text(o.span) << "\n";
  std::cout << "ids        ";
  for (auto id : p.tokens) std::cout << ' ' << id;
  std::cout << "\n--- text ---\n" << vocab.decode(p.tokens) << "\n";
  return 0;
}

int cmd_validate(const std::string& data, const std::string& kind) {
  const auto report = ecs::load_samples(data, ecs::parse_task_kind(kind));
  for (const auto& issue : report.issues)
    std::cout << data << ":" << issue.line << ": " << ecs::to_string(issue.code) << ": " << issue.message << "\n";
  std::cout << report.samples.size() << " valid, " << report.issues.size() << " invalid\n";
  return report.ok() ? 0 : 1;
}

int report_grid(const std::vector<ecs::GridResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    std::cout << r.output_dir.string() << ": " << r.records << " records, " << r.computed_cells << " computed, "
              << r.reused_cells << " reused, " << r.skipped_cells.size() << " skipped, " << r.failed_cells.size()
              << " failed\n";
    for (const auto& c : r.failed_cells) std::cout << "  failed " << c << "\n";
    ok = ok && r.ok();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expanded computation space experiments on a toy transformer"};
  app.require_subcommand(1);
  std::size_t workers = 0;
  app.add_option("--workers", workers, "Worker threads (0 = all cores; ECS_WORKERS overrides)");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Evaluate the filler grid against the last listed checkpoint");
  run->add_option("--config", config_path, "Sweep config JSON")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep-checkpoints", "Evaluate the grid for every listed checkpoint");
  sweep->add_option("--config", config_path, "Sweep config JSON")->required()->check(CLI::ExistingFile);

  std::string plot_in, plot_out;
  auto* plot = app.add_subcommand("plot", "Render SVG charts from an aggregate CSV");
  plot->add_option("--in", plot_in, "aggregate.csv or checkpoint_aggregate.csv")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Output directory")->required();

  ecs::ModelParams params;
  std::string norm = "pre", positions = "rotary", weights_out;
  std::uint64_t weight_seed = 0;
  double init_scale = 0.05;
  auto* gen = app.add_subcommand("gen-weights", "Write seeded random weights");
  gen->add_option("--out", weights_out, "Weight file path")->required();
  gen->add_option("--seed", weight_seed, "Initialization seed");
  gen->add_option("--scale", init_scale, "Uniform init half-width");
  gen->add_option("--layers", params.num_layers);
  gen->add_option("--hidden-dim", params.hidden_dim);
  gen->add_option("--heads", params.num_heads);
  gen->add_option("--ffn-dim", params.ffn_dim);
  gen->add_option("--vocab-size", params.vocab_size);
  gen->add_option("--max-context", params.max_context);
  gen->add_option("--norm", norm, "pre|post");
  gen->add_option("--positions", positions, "rotary|learned-absolute|none");

  std::string validate_data, validate_kind = "multiple_choice";
  auto* validate = app.add_subcommand("validate", "Check a dataset file and list invalid records");
  validate->add_option("--data", validate_data)->required()->check(CLI::ExistingFile);
  validate->add_option("--kind", validate_kind, "multiple_choice|free_form_math");

  PromptArgs prompt_args;
  auto* dump = app.add_subcommand("dump-prompt", "Show the assembled token sequence and spans");
  add_prompt_options(dump, prompt_args);

  std::string analyze_weights, analyze_out;
  bool heatmaps = false;
  auto* analyze = app.add_subcommand("analyze", "Attention region statistics and heatmaps for one prompt");
  add_prompt_options(analyze, prompt_args);
  analyze->add_option("--weights", analyze_weights)->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", analyze_out, "Output directory")->required();
  analyze->add_flag("--heatmaps", heatmaps, "Also render one SVG per (layer, head)");

  std::string vocab_out;
  auto* vocab_cmd = app.add_subcommand("vocab", "Export the built-in vocabulary");
  vocab_cmd->add_option("--out", vocab_out)->required();

  CLI11_PARSE(app, argc, argv);

  const ecs::RunOptions opt{workers, &std::cerr};
  try {
    if (*run) return report_grid(ecs::run_grid(ecs::load_sweep_config(config_path), opt));
    if (*sweep) {
      const auto r = ecs::checkpoint_sweep(ecs::load_sweep_config(config_path), opt);
      int status = 0;
      for (const auto& per_ckpt : r.per_checkpoint) status |= report_grid(per_ckpt);
      for (const auto& csv : r.aggregate_csvs) std::cout << "wrote " << csv.string() << "\n";
      return status;
    }
    if (*plot) {
      for (const auto& p : ecs::emit_plots(plot_in, plot_out)) std::cout << "wrote " << p.string() << "\n";
      return 0;
    }
    if (*gen) {
      params.norm_placement = ecs::parse_norm_placement(norm);
      params.positional_scheme = ecs::parse_positional_scheme(positions);
      const ecs::ModelConfig cfg(params);
      ecs::save_checkpoint(weights_out, cfg, ecs::random_weights(cfg, weight_seed, init_scale));
      std::cout << "wrote " << weights_out << "\n";
      return 0;
    }
    if (*validate) return cmd_validate(validate_data, validate_kind);
    if (*dump) return cmd_dump_prompt(prompt_args);
    if (*analyze) {
      const auto vocab = vocab_from(prompt_args.vocab);
      const auto ck = ecs::load_checkpoint(analyze_weights);
      if (ck.config.vocab_size() != vocab.size())
        ecs::fail(ecs::ErrorCode::WeightError, "checkpoint vocab_size does not match the vocabulary");
      const auto sample = pick_sample(prompt_args);
      const auto p = ecs::assemble(sample, ecs::parse_filler_spec(prompt_args.filler), template_from(prompt_args.tmpl),
                                   vocab, ck.config.max_context());
      const auto r = ecs::forward(p.tokens, ck.config, ck.weights, {.attentions = true});
      fs::create_directories(analyze_out);
      const fs::path csv = fs::path(analyze_out) / "region_stats.csv";
      ecs::write_text_file(csv, ecs::format_region_stats_csv(ecs::region_stats(*r.attentions, p, vocab)));
      std::cout << "wrote " << csv.string() << "\n";
      if (heatmaps)
        for (std::size_t l = 0; l < r.attentions->size(); ++l)
          for (std::size_t h = 0; h < (*r.attentions)[l].size(); ++h)
            ecs::render_heatmap((*r.attentions)[l][h], p, l, h, fs::path(analyze_out) / ecs::heatmap_filename(l, h));
      return 0;
    }
    if (*vocab_cmd) {
      ecs::save_vocabulary(vocab_out, ecs::default_vocabulary());
      std::cout << "wrote " << vocab_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
