#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "attnablate/intervention.hpp"
#include "attnablate/model.hpp"
#include "attnablate/qa.hpp"
#include "attnablate/report.hpp"
#include "attnablate/runner.hpp"
#include "attnablate/scm.hpp"

namespace attnablate::cli {
namespace {

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

std::string fmt_dist(const scm::Dist& d) {
  std::ostringstream os;
  os << std::setprecision(12);
  for (std::size_t i = 0; i < d.probs().size(); ++i) os << (i ? " " : "") << d.probs()[i];
  return os.str();
}

// Adjustment vs. mutilated-graph oracle for every treatment value.
double compare_front_door(const scm::Scm& model, const std::string& x, const std::set<std::string>& m,
                          const std::string& y, std::ostream& out) {
  const auto obs = scm::joint_distribution(model);
  const auto xi = model.graph.index(x);
  double worst = 0.0;
  for (std::size_t v = 0; v < model.cardinalities[xi]; ++v) {
    const auto adjusted = scm::front_door_adjust(obs, x, m, y, v);
    const auto oracle = scm::do_oracle(model, x, v, y);
    double diff = 0.0;
    for (std::size_t k = 0; k < adjusted.probs().size(); ++k)
      diff = std::max(diff, std::abs(adjusted.probs()[k] - oracle.probs()[k]));
    worst = std::max(worst, diff);
    out << "do(" << x << "=" << v << "): adjustment P(" << y << ") = [" << fmt_dist(adjusted) << "]  oracle = ["
        << fmt_dist(oracle) << "]  |diff| = " << diff << '\n';
  }
  return worst;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const std::optional<std::uint64_t>& seed,
            const std::vector<std::string>& formats, std::ostream& out) {
  ExperimentConfig config = ExperimentConfig::from_file(config_path);
  if (seed) config.seed = *seed;
  if (!out_dir.empty()) config.output_dir = out_dir;
  std::vector<ReportFormat> fs;
  for (const auto& f : formats) fs.push_back(parse_report_format(f));
  const ExperimentReport report = run_experiment(config);
  for (const auto& p : report.points) {
    out << std::left << std::setw(10) << p.label << " mean_acc=" << format_double(p.accuracy.mean)
        << " delta_vs_zo=" << format_double(p.delta_vs_zo) << '\n';
  }
  for (const auto& path : emit_report(report, fs, config.output_dir)) out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_grid(const std::string& model, const std::string& bench, const std::string& registry, bool list,
             std::ostream& out) {
  const GridRegistry reg = registry.empty() ? GridRegistry::builtin() : GridRegistry::from_file(registry);
  if (list) {
    for (const auto& [m, b] : reg.known_pairs()) out << m << '\t' << b << '\t' << join(reg.grid(m, b).labels(), ",") << '\n';
    return 0;
  }
  if (model.empty() || bench.empty()) throw CLI::ValidationError("grid needs --model and --benchmark (or --list)");
  out << join(reg.grid(model, bench).labels(), ",") << '\n';
  return 0;
}

int cmd_import(const std::string& from, const std::string& in_path, const std::string& out_path, std::ostream& out) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw InputError("input not found: " + in_path);
  QaSet set;
  if (from == "truthfulqa-csv") {
    set = import_truthfulqa_csv(in);
  } else {
    set = import_halueval_json(in);
  }
  std::ofstream dst(out_path, std::ios::binary | std::ios::trunc);
  if (!dst) throw Error("cannot write " + out_path);
  write_qaset(set, dst);
  out << "imported " << set.size() << " items (" << to_string(set.format) << ") to " << out_path << '\n';
  return 0;
}

void save_scm(const scm::Scm& model, const std::string& path, std::ostream& out) {
  if (path.empty()) return;
  std::ofstream dst(path, std::ios::binary | std::ios::trunc);
  if (!dst) throw Error("cannot write " + path);
  dst << scm::to_json(model) << '\n';
  out << "saved SCM to " << path << '\n';
}

int cmd_scm(const std::string& demo, std::uint64_t seed, std::size_t latents, const std::string& file,
            const std::string& x, const std::vector<std::string>& m, const std::string& y, const std::string& save,
            std::ostream& out) {
  if (!file.empty()) {
    const scm::Scm model = scm::load_scm(file);
    const std::set<std::string> ms(m.begin(), m.end());
    const auto verdict = scm::check_front_door(model.graph, x, ms, y);
    out << "front-door (" << x << ", {" << join(m, ",") << "}, " << y << "): "
        << (verdict ? "holds" : "fails: " + verdict.violation) << '\n';
    if (!verdict) return 1;
    const double worst = compare_front_door(model, x, ms, y, out);
    out << "max |adjustment - oracle| = " << worst << (worst <= 1e-9 ? "  (agree within 1e-9)" : "  (DISAGREE)") << '\n';
    return worst <= 1e-9 ? 0 : 1;
  }
  if (demo == "frontdoor") {
    const scm::CausalGraph g({"U", "X", "M", "Y"}, {{"U", "X"}, {"U", "Y"}, {"X", "M"}, {"M", "Y"}});
    const scm::Scm model = scm::random_scm(g, seed);
    save_scm(model, save, out);
    const auto verdict = scm::check_front_door(g, "X", {"M"}, "Y");
    out << "graph: U->X, U->Y, X->M, M->Y (U unobserved), seed " << seed << '\n';
    out << "front-door (X, {M}, Y): " << (verdict ? "holds" : "fails: " + verdict.violation) << '\n';
    const auto obs = scm::joint_distribution(model);
    for (std::size_t v = 0; v < 2; ++v)
      out << "observational P(Y | X=" << v << ") = " << obs.prob({{"X", v}, {"Y", 1}}) / obs.prob({{"X", v}}) << '\n';
    const double worst = compare_front_door(model, "X", {"M"}, "Y", out);
    out << "max |adjustment - oracle| = " << worst << (worst <= 1e-9 ? "  (agree within 1e-9)" : "  (DISAGREE)") << '\n';
    return worst <= 1e-9 ? 0 : 1;
  }
  if (demo == "template") {
    const scm::Scm model = scm::hallucination_scm_template(latents, seed);
    save_scm(model, save, out);
    std::vector<std::string> edges;
    for (const auto& [a, b] : model.graph.edges()) edges.push_back(a + "->" + b);
    out << "edges: " << join(edges, ", ") << '\n';
    const auto block = scm::latent_block(latents);
    const auto verdict = scm::check_front_door(model.graph, block, {"H"}, "Y");
    out << "front-door (Z-block, {H}, Y): " << (verdict ? "holds" : "fails: " + verdict.violation) << '\n';
    const auto obs = scm::joint_distribution(model).marginal({"Y"});
    const auto benign = scm::do_oracle(model, "H", scm::kBenign, "Y");
    out << "P(Y=hallucinated) observational = " << obs.probs()[scm::kHallucinated]
        << ", under do(H=benign) = " << benign.probs()[scm::kHallucinated] << '\n';
    return 0;
  }
  throw CLI::ValidationError("scm needs --demo frontdoor|template or --file");
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  const WeightsHeader h = read_weights_header(path);
  out << "format_version: " << h.format_version << '\n'
      << "num_layers: " << h.config.num_layers << '\n'
      << "num_heads: " << h.config.num_heads << '\n'
      << "model_dim: " << h.config.model_dim << '\n'
      << "mlp_hidden_dim: " << h.config.mlp_hidden_dim << '\n'
      << "vocab_size: " << h.config.vocab_size << '\n'
      << "max_seq_len: " << h.config.max_seq_len << '\n'
      << "tensors: " << h.tensors.size() << '\n';
  for (const auto& t : h.tensors) {
    std::vector<std::string> dims;
    for (auto d : t.shape) dims.push_back(std::to_string(d));
    out << "  " << t.name << " [" << join(dims, "x") << "]\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-layer ablation experiments and front-door causal tooling", "attnablate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> formats{"json", "csv", "plotdata"};
  auto* run_cmd = app.add_subcommand("run", "Run an ablation sweep from a config file");
  run_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run_cmd->add_option("--out", out_dir, "Output directory (overrides config)");
  run_cmd->add_option("--seed", seed, "Sampling seed (overrides config)");
  run_cmd->add_option("--format", formats, "Report formats: json, csv, plotdata")->delimiter(',');

  std::string grid_model, grid_bench, registry;
  bool list = false;
  auto* grid_cmd = app.add_subcommand("grid", "Print built-in sweep grids");
  grid_cmd->add_option("--model", grid_model, "Model name, e.g. \"Gemma-2B-instruct\"");
  grid_cmd->add_option("--benchmark", grid_bench, "truthfulqa or halueval");
  grid_cmd->add_option("--config", registry, "Grid registry file instead of the built-in one");
  grid_cmd->add_flag("--list", list, "List every known grid");

  std::string from, in_path, import_out;
  auto* import_cmd = app.add_subcommand("import", "Convert upstream datasets to the JSONL schema");
  import_cmd->add_option("--from", from, "truthfulqa-csv or halueval-json")
      ->required()
      ->check(CLI::IsMember({"truthfulqa-csv", "halueval-json"}));
  import_cmd->add_option("--in", in_path, "Upstream file")->required();
  import_cmd->add_option("--out", import_out, "Output JSONL")->required();

  std::string demo, scm_file, fx = "X", fy = "Y";
  std::vector<std::string> fm{"M"};
  std::uint64_t scm_seed = 0;
  std::size_t latents = 1;
  auto* scm_cmd = app.add_subcommand("scm", "Front-door demos: template, adjustment vs. oracle");
  scm_cmd->add_option("--demo", demo, "frontdoor or template")->check(CLI::IsMember({"frontdoor", "template"}));
  scm_cmd->add_option("--seed", scm_seed, "Seed for random mechanisms");
  scm_cmd->add_option("--latents", latents, "Number of latent factors (template demo)")->check(CLI::PositiveNumber);
  scm_cmd->add_option("--file,--config", scm_file, "SCM interchange file; checks and adjusts (X, M, Y)");
  scm_cmd->add_option("--x", fx, "Treatment variable");
  scm_cmd->add_option("--m", fm, "Mediator variable(s)")->delimiter(',');
  scm_cmd->add_option("--y", fy, "Outcome variable");
  std::string scm_save;
  scm_cmd->add_option("--save", scm_save, "Write the demo SCM as an interchange file");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Dump a weights file header");
  inspect_cmd->add_option("model", inspect_path, "Weights file")->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*run_cmd) return cmd_run(config_path, out_dir, seed, formats, out);
    if (*grid_cmd) return cmd_grid(grid_model, grid_bench, registry, list, out);
    if (*import_cmd) return cmd_import(from, in_path, import_out, out);
    if (*scm_cmd) return cmd_scm(demo, scm_seed, latents, scm_file, fx, fm, fy, scm_save, out);
    if (*inspect_cmd) return cmd_inspect(inspect_path, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace attnablate::cli
