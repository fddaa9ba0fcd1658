#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "neuralign/binio.hpp"
#include "neuralign/errors.hpp"
#include "neuralign/losses.hpp"
#include "neuralign/simdata.hpp"
#include "neuralign/train.hpp"

using nlohmann::json;
using namespace neuralign;

// Exit codes: 0 success, 1 check failure, 2 usage/config, 3 I/O,
// 4 numerical divergence. Standard output carries machine-readable payloads
// only; human logs go to standard error.

namespace {

json read_json_config(const std::string& path) {
  // Config problems are usage errors (exit 2), unlike data/checkpoint I/O.
  try {
    const auto bytes = read_file(path);
    return json::parse(bytes.begin(), bytes.end());
  } catch (const IoError& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::optional<std::uint64_t> env_seed_override() {
  const char* s = std::getenv("NEURALIGN_SEED");
  if (!s || !*s) return {};
  std::uint64_t v = 0;
  const auto res = std::from_chars(s, s + std::string_view(s).size(), v);
  if (res.ec != std::errc{} || *res.ptr != '\0')
    throw std::invalid_argument("NEURALIGN_SEED: not an unsigned integer");
  return v;
}

TrainConfig load_train_config(const std::string& path) {
  TrainConfig config = TrainConfig::from_json(read_json_config(path));
  if (const auto seed = env_seed_override()) {
    config.seed_init = *seed;
    config.seed_data = *seed;
  }
  return config;
}

std::string history_name_for(const std::string& ckpt_path) {
  return std::filesystem::path(ckpt_path).filename().string() + ".history.csv";
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  WorldSpec spec;
  try {
    spec = world_spec_from_json(read_json_config(config_path));
  } catch (const json::exception& e) {
    throw std::invalid_argument(config_path + ": " + e.what());
  }
  if (const auto seed = env_seed_override()) spec.seed = *seed;

  const World world = generate_world(spec);
  const Dataset ds = make_dataset(world);
  save_dataset(ds, out_dir);

  json subjects = json::array();
  for (const auto& s : ds.subjects)
    subjects.push_back({{"id", s.id}, {"voxels", s.voxels}, {"conserved", s.conserved}});
  const json summary{{"dir", out_dir},
                     {"subjects", subjects},
                     {"train_samples", spec.train_samples},
                     {"eval_samples", spec.eval_samples},
                     {"bank_size", spec.bank_size()},
                     {"seed", spec.seed}};
  std::cerr << "simulate: wrote " << ds.subjects.size() << " subjects to " << out_dir
            << "\n";
  std::cout << summary.dump() << std::endl;
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& novel_id, const std::string& known_id,
              const std::string& out_path, std::optional<long long> epochs_override) {
  TrainConfig config = load_train_config(config_path);
  if (epochs_override) {
    if (*epochs_override < 0) throw std::invalid_argument("--epochs must be >= 0");
    config.epochs = *epochs_override;
  }

  const Dataset ds = load_dataset(data_dir);
  const TrainData data = TrainData::from_dataset(ds, novel_id, known_id);

  std::cerr << "train: " << novel_id << " -> " << known_id << ", h="
            << config.hidden_size << ", epochs=" << config.epochs << "\n";
  TrainResult res = train(config, data);

  save_checkpoint(out_path, res.checkpoint);
  write_text_atomic(out_path + ".history.csv", history_csv(res.checkpoint.history));
  res.report.history_ref = history_name_for(out_path);

  if (res.diverged) {
    write_text_atomic(out_path + ".diverged", "training diverged; checkpoint holds the last finite state\n");
    std::cerr << "train: diverged after epoch " << res.checkpoint.epoch << "\n";
    std::cout << res.report.to_json().dump() << std::endl;
    return 4;
  }
  std::cout << res.report.to_json().dump() << std::endl;
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt_path,
             const std::string& report_path) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const Dataset ds = load_dataset(data_dir);
  const TrainData data = TrainData::from_dataset(ds, ck.novel_id, ck.known_id);

  EvalOptions opts;
  opts.oracle = data.oracle.empty() ? nullptr : &data.oracle;
  opts.conserved_novel = data.conserved_novel;
  opts.conserved_known = data.conserved_known;
  opts.retrieval_seed = ck.config.seed_init;
  opts.history_ref = history_name_for(ckpt_path);

  const MetricsReport report =
      evaluate(ck.selected_model(), data.novel_eval, data.known_eval, opts);
  const std::string payload = report.to_json().dump();
  write_text_atomic(report_path, payload + "\n");
  std::cout << payload << std::endl;
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double eps, const std::string& dims_str,
                  std::size_t batch) {
  Dims dims;
  {
    std::vector<std::size_t> parts;
    std::size_t pos = 0;
    while (pos <= dims_str.size()) {
      const std::size_t comma = dims_str.find(',', pos);
      const std::string tok =
          dims_str.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      std::size_t v = 0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw std::invalid_argument("--dims expects \"n,k,h,a\"");
      parts.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (parts.size() != 4) throw std::invalid_argument("--dims expects \"n,k,h,a\"");
    dims = {parts[0], parts[1], parts[2], parts[3], 0};
  }
  if (batch < 2) throw std::invalid_argument("--batch must be >= 2");

  const AlignmentModel model = init_model(dims, RngState(seed, 0));
  PairedBatch pb;
  RngState r1(seed, 1), r2(seed, 2), r3(seed, 3), r4(seed, 4);
  pb.F_N = gaussian(r1, batch, dims.n, 0.0, 1.0);
  pb.F_K = gaussian(r2, batch, dims.k, 0.0, 1.0);
  pb.E_N = gaussian(r3, batch, dims.a, 0.0, 1.0);
  pb.E_K = gaussian(r4, batch, dims.a, 0.0, 1.0);

  const LossCoeffs coeffs;  // default coefficients, all four terms active
  const auto per_block = finite_diff_check_per_block(model, pb, coeffs, eps);

  constexpr double kThreshold = 1e-5;
  double worst = 0.0;
  json blocks;
  for (const auto& [name, err] : per_block) {
    blocks[name] = err;
    worst = std::max(worst, err);
  }
  const bool pass = worst <= kThreshold;
  const json out{{"worst", worst},
                 {"threshold", kThreshold},
                 {"pass", pass},
                 {"per_block", blocks},
                 {"eps", eps},
                 {"seed", seed}};
  std::cout << out.dump() << std::endl;
  return pass ? 0 : 1;
}

int cmd_export_tq(const std::string& ckpt_path, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const std::vector<double> values = tq(compose_btm(ck.selected_model()));
  write_text_atomic(out_path, tq_csv(values));
  const json summary{{"out", out_path}, {"rows", values.size()}};
  std::cout << summary.dump() << std::endl;
  return 0;
}

int cmd_sweep(const std::string& data_dir, const std::string& config_path,
              const std::string& hidden_str, const std::string& out_path,
              std::string novel_id, std::string known_id) {
  TrainConfig config = load_train_config(config_path);

  std::vector<std::size_t> hs;
  {
    std::size_t pos = 0;
    while (pos <= hidden_str.size()) {
      const std::size_t comma = hidden_str.find(',', pos);
      const std::string tok = hidden_str.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      std::size_t v = 0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || v == 0)
        throw std::invalid_argument("--hidden expects comma-separated sizes >= 1");
      hs.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (hs.empty()) throw std::invalid_argument("--hidden expects at least one size");
  }

  const Dataset ds = load_dataset(data_dir);
  if (novel_id.empty() || known_id.empty()) {
    if (ds.subjects.size() < 2)
      throw std::invalid_argument("sweep: dataset needs at least two subjects");
    if (novel_id.empty()) novel_id = ds.subjects[0].id;
    if (known_id.empty()) known_id = ds.subjects[1].id;
  }
  const TrainData data = TrainData::from_dataset(ds, novel_id, known_id);

  std::cerr << "sweep: " << novel_id << " -> " << known_id << " over " << hs.size()
            << " hidden sizes\n";
  const auto rows = rank_sweep(config, hs, data);
  write_text_atomic(out_path, sweep_csv(rows));

  std::size_t ok = 0;
  for (const auto& r : rows)
    if (r.ok) ++ok;
  const json summary{{"out", out_path},
                     {"rows", rows.size()},
                     {"ok", ok},
                     {"failed", rows.size() - ok}};
  std::cout << summary.dump() << std::endl;
  return ok > 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-subject neural alignment: low-rank transfer training at desk scale"};
  app.require_subcommand(1);

  int rc = 0;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic multi-subject dataset");
  std::string sim_config, sim_out;
  sim->add_option("--config", sim_config, "world spec JSON")->required();
  sim->add_option("--out", sim_out, "output dataset directory")->required();
  sim->callback([&] { rc = cmd_simulate(sim_config, sim_out); });

  auto* tr = app.add_subcommand("train", "Train a transfer from one subject to another");
  std::string tr_data, tr_config, tr_novel, tr_known, tr_out;
  std::optional<long long> tr_epochs;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--config", tr_config, "train config JSON")->required();
  tr->add_option("--novel", tr_novel, "novel subject id")->required();
  tr->add_option("--known", tr_known, "known subject id")->required();
  tr->add_option("--out", tr_out, "checkpoint output path")->required();
  tr->add_option("--epochs", tr_epochs, "override epoch count");
  tr->callback([&] { rc = cmd_train(tr_data, tr_config, tr_novel, tr_known, tr_out, tr_epochs); });

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the shared eval split");
  std::string ev_data, ev_ckpt, ev_report;
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--report", ev_report, "report JSON output path")->required();
  ev->callback([&] { rc = cmd_eval(ev_data, ev_ckpt, ev_report); });

  auto* gc = app.add_subcommand("gradcheck", "Verify analytic gradients against finite differences");
  std::uint64_t gc_seed = 1;
  double gc_eps = 1e-5;
  std::string gc_dims = "6,5,3,4";
  std::size_t gc_batch = 3;
  gc->add_option("--seed", gc_seed, "model/batch seed");
  gc->add_option("--eps", gc_eps, "central-difference step");
  gc->add_option("--dims", gc_dims, "n,k,h,a");
  gc->add_option("--batch", gc_batch, "batch size");
  gc->callback([&] { rc = cmd_gradcheck(gc_seed, gc_eps, gc_dims, gc_batch); });

  auto* tqc = app.add_subcommand("export-tq", "Export per-voxel transfer quantity as CSV");
  std::string tq_ckpt, tq_out;
  tqc->add_option("--ckpt", tq_ckpt, "checkpoint path")->required();
  tqc->add_option("--out", tq_out, "CSV output path")->required();
  tqc->callback([&] { rc = cmd_export_tq(tq_ckpt, tq_out); });

  auto* sw = app.add_subcommand("sweep", "Train across hidden sizes and tabulate metrics");
  std::string sw_data, sw_config, sw_hidden, sw_out, sw_novel, sw_known;
  sw->add_option("--data", sw_data, "dataset directory")->required();
  sw->add_option("--config", sw_config, "train config JSON")->required();
  sw->add_option("--hidden", sw_hidden, "comma-separated hidden sizes")->required();
  sw->add_option("--out", sw_out, "CSV output path")->required();
  sw->add_option("--novel", sw_novel, "novel subject id (default: first subject)");
  sw->add_option("--known", sw_known, "known subject id (default: second subject)");
  sw->callback([&] { rc = cmd_sweep(sw_data, sw_config, sw_hidden, sw_out, sw_novel, sw_known); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
  return rc;
}
