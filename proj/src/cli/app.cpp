#include "user/cli/app.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "user/cli/run_config.hpp"
#include "user/common/error.hpp"
#include "user/log/log_io.hpp"
#include "user/train/gradcheck_suite.hpp"

namespace user {
namespace {

namespace fs = std::filesystem;

struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "flat key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override one config key (key=value), repeatable");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!file.empty()) c.load_file(file);
    for (const auto& s : sets) c.set_assignment(s);
    return c;
  }
};

Task parse_task(const std::string& s) {
  if (s == "search") return Task::Search;
  if (s == "recommend") return Task::Recommend;
  throw ConfigError("task must be search or recommend, got " + s);
}

std::size_t count_task(const std::vector<Impression>& v, Task t) {
  std::size_t n = 0;
  for (const auto& i : v) n += i.task == t ? 1 : 0;
  return n;
}

void print_counts(std::ostream& out, const char* name, const std::vector<Impression>& v) {
  out << name << ": " << v.size() << " impressions (" << count_task(v, Task::Search) << " search, "
      << count_task(v, Task::Recommend) << " recommend)\n";
}

int cmd_gen(const ConfigFlags& flags, const std::string& out_dir, std::ostream& out) {
  const auto cfg = flags.resolve();
  const auto world = cfg.world();
  auto d = generate_dataset(world, out_dir);
  cfg.write_echo(out_dir);
  out << "users: " << d.users.size() << "\nsessions: " << d.sessions << "\nevents: " << d.log.size()
      << "\nsearches: " << d.searches.size() << "\ndocuments: " << d.corpus.size() << "\nwrote " << out_dir << '\n';
  return kExitOk;
}

int cmd_prepare(const ConfigFlags& flags, const std::string& log_path, std::string corpus_path, std::string out_dir,
                std::ostream& out) {
  const auto cfg = flags.resolve();
  const fs::path log(log_path);
  if (!fs::exists(log)) throw Error("log file not found: " + log_path);
  if (corpus_path.empty() && fs::exists(log.parent_path() / "corpus.jsonl"))
    corpus_path = (log.parent_path() / "corpus.jsonl").string();
  if (out_dir.empty()) out_dir = (log.parent_path() / "prepared").string();
  auto events = parse_log(log);
  auto docs = corpus_path.empty() ? corpus_from_log(events) : read_corpus(corpus_path);
  auto d = prepare_data(events, docs, cfg.prepare());
  save_prepared(out_dir, d);
  cfg.write_echo(out_dir);
  out << "events: " << events.size() << "\ndocuments: " << docs.size() << '\n';
  print_counts(out, "train", d.train);
  print_counts(out, "val", d.val);
  print_counts(out, "test", d.test);
  out << "skipped searches without a sat-click: " << d.skipped_searches << "\nvocabulary: " << d.vocab.size()
      << "\nwrote " << out_dir << '\n';
  return kExitOk;
}

int cmd_pretrain(const ConfigFlags& flags, const std::string& data_dir, const std::string& out_dir, int workers,
                 std::ostream& out) {
  auto cfg = flags.resolve();
  if (workers > 0) cfg.set("workers", std::to_string(workers));
  auto data = load_prepared(data_dir);
  UserModel<float> model(cfg.model(), data.vocab, data.users);
  fs::create_directories(out_dir);
  std::ofstream log(fs::path(out_dir) / "metrics.jsonl");
  auto summary = pretrain_unified(model, data.train, data.val, cfg.pretrain(), &log);
  save_model(out_dir, model);
  cfg.write_echo(out_dir);
  out << "parameters: " << model.params().parameter_count() << "\nepochs run: " << summary.epochs.size()
      << "\nbest epoch: " << summary.best_epoch << " (validation selection " << summary.best_selection << ")\nwrote "
      << out_dir << '\n';
  return kExitOk;
}

int cmd_finetune(const ConfigFlags& flags, const std::string& model_dir, const std::string& task_s,
                 const std::string& data_dir, const std::string& out_dir, int workers, std::ostream& out) {
  auto cfg = flags.resolve();
  if (workers > 0) cfg.set("workers", std::to_string(workers));
  const Task task = parse_task(task_s);
  auto unified = load_model<float>(model_dir);
  auto data = load_prepared(data_dir);
  fs::create_directories(out_dir);
  std::ofstream log(fs::path(out_dir) / "metrics.jsonl");
  TrainSummary summary;
  auto tuned = finetune(unified, task, select_task(data.train, task), data.val, cfg.finetune(), &log, &summary);
  save_model(out_dir, tuned);
  cfg.write_echo(out_dir);
  out << "task: " << task_s << "\nbest epoch: " << summary.best_epoch << " (validation selection "
      << summary.best_selection << ")\nwrote " << out_dir << '\n';
  return kExitOk;
}

const std::vector<Impression>& split_of(const PreparedData& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "val") return d.val;
  if (split == "test") return d.test;
  throw ConfigError("split must be train, val or test");
}

int cmd_eval(const std::string& model_dir, const std::string& data_dir, const std::string& split,
             std::string task_s, const std::string& report, const std::string& dump, int workers, std::ostream& out) {
  auto model = load_model<float>(model_dir);
  if (task_s.empty()) {
    if (model.tag == ModelTag::Unified) throw ConfigError("--task is required for a unified model");
    task_s = tag_name(model.tag);
  }
  const Task task = parse_task(task_s);
  if (model.tag != ModelTag::Unified && tag_for(task) != model.tag)
    throw ConfigError("model is tagged " + std::string(tag_name(model.tag)) + ", cannot evaluate " + task_s);
  auto data = load_prepared(data_dir);
  auto imps = select_task(split_of(data, split), task);
  auto r = evaluate(model, imps, task_s, std::max(1, workers), !dump.empty());
  auto j = r.to_json();
  j["split"] = split;
  out << j.dump(2) << '\n';
  if (!report.empty()) {
    std::ofstream f(report);
    if (!f) throw Error("cannot write " + report);
    f << j.dump(2) << '\n';
  }
  if (!dump.empty()) {
    std::ofstream f(dump);
    if (!f) throw Error("cannot write " + dump);
    f << per_impression_tsv(r);
  }
  return kExitOk;
}

int cmd_rank(const std::string& model_dir, const std::string& imps_path, const std::string& out_path,
             std::ostream& out) {
  auto model = load_model<float>(model_dir);
  auto imps = read_impressions(imps_path);
  std::ofstream file;
  std::ostream* dst = &out;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw Error("cannot write " + out_path);
    dst = &file;
  }
  *dst << std::setprecision(9);
  for (const auto& imp : imps) {
    if (imp.candidates.empty()) throw Error("impression " + imp.id + " has no candidates");
    auto ranked = rank_candidates(imp.candidates, model.score_impression(imp));
    for (std::size_t i = 0; i < ranked.size(); ++i)
      *dst << imp.id << '\t' << i + 1 << '\t' << ranked[i].doc_id << '\t' << ranked[i].score << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(int dim, std::uint64_t seed, std::size_t samples, double tol, std::ostream& out) {
  if (dim < 2) throw ConfigError("--dim must be at least 2");
  double worst = 0;
  out << std::setprecision(3);
  for (const auto& e : run_gradcheck_suite(dim, seed, samples)) {
    out << e.module << ": max relative error " << std::scientific << e.result.max_rel_error << std::defaultfloat
        << " over " << e.result.coordinates << " coordinates";
    if (!e.result.worst_param.empty()) out << " (worst " << e.result.worst_param << ")";
    out << '\n';
    worst = std::max(worst, e.result.max_rel_error);
  }
  const bool pass = worst < tol;
  out << "max relative error: " << std::scientific << worst << std::defaultfloat << (pass ? " < " : " >= ") << tol
      << (pass ? " PASS" : " FAIL") << '\n';
  return pass ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"USER: unified personalized search and recommendation", "user"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, prep_flags, pre_flags, ft_flags;
  std::string gen_out, log_path, corpus_path, prep_out, data_dir, pre_out, model_dir, task, ft_out, split = "test",
                                                                                                report, dump,
                                                                                                imps_path, rank_out;
  int workers = 0, dim = 8;
  std::uint64_t gc_seed = 1;
  std::size_t samples = 16;
  double tol = 1e-4;

  auto* gen = app.add_subcommand("gen", "generate a synthetic behavior log");
  gen_flags.attach(gen);
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* prep = app.add_subcommand("prepare", "build impressions from a behavior log");
  prep_flags.attach(prep);
  prep->add_option("--log", log_path, "behavior log (JSON Lines)")->required();
  prep->add_option("--corpus", corpus_path, "corpus file (default: corpus.jsonl next to the log)");
  prep->add_option("--out", prep_out, "output directory (default: prepared/ next to the log)");

  auto* pre = app.add_subcommand("pretrain", "train the unified model on both tasks");
  pre_flags.attach(pre);
  pre->add_option("--data", data_dir, "prepared data directory")->required();
  pre->add_option("--out", pre_out, "model output directory")->required();
  pre->add_option("--workers", workers, "worker threads");

  auto* ft = app.add_subcommand("finetune", "specialize a unified model to one task");
  ft_flags.attach(ft);
  ft->add_option("--model", model_dir, "unified model directory")->required();
  ft->add_option("--task", task, "search or recommend")->required();
  ft->add_option("--data", data_dir, "prepared data directory")->required();
  ft->add_option("--out", ft_out, "model output directory")->required();
  ft->add_option("--workers", workers, "worker threads");

  auto* ev = app.add_subcommand("eval", "evaluate a model on a prepared split");
  ev->add_option("--model", model_dir, "model directory")->required();
  ev->add_option("--data", data_dir, "prepared data directory")->required();
  ev->add_option("--split", split, "train, val or test");
  ev->add_option("--task", task, "search or recommend (default: the model's task)");
  ev->add_option("--out", report, "write the report JSON here too");
  ev->add_option("--dump", dump, "per-impression metrics TSV");
  ev->add_option("--workers", workers, "worker threads");

  auto* rk = app.add_subcommand("rank", "score and rank the candidates of an impression file");
  rk->add_option("--model", model_dir, "model directory")->required();
  rk->add_option("--impressions", imps_path, "impressions (JSON Lines)")->required();
  rk->add_option("--out", rank_out, "output TSV (default: stdout)");

  auto* gc = app.add_subcommand("gradcheck", "central-difference gradient checks of every module");
  gc->add_option("--dim", dim, "embedding size");
  gc->add_option("--seed", gc_seed, "initialization seed");
  gc->add_option("--samples", samples, "coordinates sampled per parameter");
  gc->add_option("--tol", tol, "maximum accepted relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run 'user --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_flags, gen_out, out);
    if (prep->parsed()) return cmd_prepare(prep_flags, log_path, corpus_path, prep_out, out);
    if (pre->parsed()) return cmd_pretrain(pre_flags, data_dir, pre_out, workers, out);
    if (ft->parsed()) return cmd_finetune(ft_flags, model_dir, task, data_dir, ft_out, workers, out);
    if (ev->parsed()) return cmd_eval(model_dir, data_dir, split, task, report, dump, workers, out);
    if (rk->parsed()) return cmd_rank(model_dir, imps_path, rank_out, out);
    if (gc->parsed()) return cmd_gradcheck(dim, gc_seed, samples, tol, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  err << "usage error: no subcommand\n";
  return kExitUsage;
}

}  // namespace user
