#include "idsel/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "idsel/annotation.hpp"
#include "idsel/corpus.hpp"
#include "idsel/errors.hpp"
#include "idsel/fewshot.hpp"
#include "idsel/geometry.hpp"
#include "idsel/parallel.hpp"
#include "idsel/selectors.hpp"
#include "idsel/service.hpp"
#include "idsel/synthetic.hpp"

#ifndef IDSEL_VERSION
#define IDSEL_VERSION "0.0.0"
#endif

namespace idsel {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Options {
  std::string corpus;
  std::string embeddings;
  std::string test_file;
  std::string out;
  std::string format;
  std::vector<std::string> methods;
  double beta = kDefaultBeta;
  std::string lls_mode = "previous";
  std::optional<std::size_t> min_cluster_size;
  std::optional<std::size_t> min_samples;
  std::vector<std::size_t> n_shots = {8, 16, 32, 64};
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  // serve
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string journal;
  std::string ui_dir;
  std::size_t background_threshold = 5000;

  // synth
  std::string out_dir;
  std::vector<std::size_t> counts = {600, 200, 100, 60, 40};
  std::vector<std::size_t> test_counts;
  std::size_t dim = 16;
  double separation = 4.0;
  double spread = 1.0;
};

void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("idsel");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("IDSEL_LOG"); level != nullptr && *level != '\0') {
      spdlog::set_level(spdlog::level::from_str(level));
    }
  });
}

std::string fnv1a_of_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return fmt::format("{:016x}", h);
}

void require_file(const std::string& path, std::string_view flag) {
  if (path.empty()) throw ValidationError(std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw ValidationError(std::string(flag) + ": no such file '" + path + "'");
}

ordered_json input_ref(const std::string& path) {
  return ordered_json{{"file", fs::path(path).filename().string()}, {"fnv1a64", fnv1a_of_file(path)}};
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> methods;
  for (const auto& name : names) {
    const Method m = parse_method(name);
    if (std::find(methods.begin(), methods.end(), m) != methods.end()) {
      throw ValidationError("method '" + name + "' listed twice");
    }
    methods.push_back(m);
  }
  if (methods.empty()) throw ValidationError("--method is empty");
  return methods;
}

SelectorConfig selector_config(const Options& o, Method method, std::size_t n_docs) {
  SelectorConfig cfg;
  cfg.method = method;
  cfg.seed = o.seed;
  cfg.beta = o.beta;
  cfg.lls_mode = parse_lls_mode(o.lls_mode);
  if (o.min_cluster_size || o.min_samples) {
    ClusterParams cp = ClusterParams::defaults_for(n_docs);
    if (o.min_cluster_size) cp.min_cluster_size = *o.min_cluster_size;
    if (o.min_samples) cp.min_samples = *o.min_samples;
    cfg.cluster = cp;
  }
  cfg.validate();
  return cfg;
}

bool wants_json(const Options& o) {
  if (o.format == "json") return true;
  if (o.format == "text") return false;
  if (!o.format.empty()) throw ValidationError("--format must be text or json");
  return fs::path(o.out).extension() == ".json";
}

void emit(const Options& o, std::ostream& out, const std::string& content) {
  if (o.out.empty()) {
    out << content;
    return;
  }
  std::ofstream f(o.out, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + o.out);
  f << content;
  if (!f) throw IoError("write failed: " + o.out);
}

std::string text_header(const ordered_json& meta) {
  std::string h = fmt::format("# {} {} {}\n", meta["tool"].get<std::string>(), meta["version"].get<std::string>(),
                              meta["command"].get<std::string>());
  for (const auto& [key, value] : meta["inputs"].items()) {
    h += fmt::format("# input {}: {} fnv1a64={}\n", key, value["file"].get<std::string>(),
                     value["fnv1a64"].get<std::string>());
  }
  h += "# params: " + meta["params"].dump() + "\n";
  for (const auto& run : meta["runs"]) {
    h += "# run " + run.dump() + "\n";
  }
  return h;
}

ordered_json base_meta(std::string_view command) {
  return ordered_json{{"tool", "idsel"},
                      {"version", IDSEL_VERSION},
                      {"command", command},
                      {"inputs", ordered_json::object()},
                      {"params", ordered_json::object()}};
}

ordered_json selector_params(const Options& o, const std::vector<Method>& methods) {
  ordered_json p = ordered_json::object();
  std::vector<std::string> names;
  for (Method m : methods) names.emplace_back(to_string(m));
  p["methods"] = names;
  p["seed"] = o.seed;
  if (std::find(methods.begin(), methods.end(), Method::lls) != methods.end()) {
    p["beta"] = o.beta;
    p["lls_mode"] = o.lls_mode;
  }
  if (o.min_cluster_size) p["min_cluster_size"] = *o.min_cluster_size;
  if (o.min_samples) p["min_samples"] = *o.min_samples;
  return p;
}

// Builds selection orders for every (method, seed) pair. Stochastic methods
// run seeds seed, seed+1, ...; deterministic methods run once.
std::vector<MethodRuns> build_runs(const Options& o, const std::vector<Method>& methods, const Corpus& corpus,
                                   const EmbeddingSet* embeddings) {
  std::vector<MethodRuns> all;
  for (Method m : methods) {
    MethodRuns runs;
    runs.method = m;
    const std::size_t n_runs = is_stochastic(m) ? o.repeats : 1;
    for (std::size_t i = 0; i < n_runs; ++i) runs.seeds.push_back(o.seed + i);
    const SelectorConfig base = selector_config(o, m, corpus.size());
    runs.orders.resize(n_runs);
    if (n_runs == 1) {
      SelectorConfig cfg = base;
      cfg.seed = runs.seeds[0];
      runs.orders[0] = select_order(corpus, embeddings, cfg, o.threads);
    } else {
      parallel_for(n_runs, o.threads, [&](std::size_t i) {
        SelectorConfig cfg = base;
        cfg.seed = runs.seeds[i];
        runs.orders[i] = select_order(corpus, embeddings, cfg, 1);
      });
    }
    spdlog::info("{}: {} run(s) ordered", to_string(m), n_runs);
    all.push_back(std::move(runs));
  }
  return all;
}

ordered_json runs_meta(const std::vector<MethodRuns>& runs) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : runs) {
    std::vector<std::string> fps;
    bool truncated = false;
    for (const auto& o : r.orders) {
      fps.push_back(o.params_fingerprint);
      truncated = truncated || o.truncated;
    }
    arr.push_back(ordered_json{{"method", to_string(r.method)}, {"seeds", r.seeds}, {"fingerprints", fps},
                               {"truncated", truncated}});
  }
  return arr;
}

void validate_common(const Options& o) {
  if (o.repeats < 1) throw ValidationError("--repeats must be >= 1");
  if (o.n_shots.empty()) throw ValidationError("--n-shots is empty");
  for (auto k : o.n_shots) {
    if (k < 1) throw ValidationError("--n-shots values must be >= 1");
  }
  if (o.beta < 0.0 || o.beta > 1.0) throw ValidationError("--beta must lie in [0, 1]");
  (void)parse_lls_mode(o.lls_mode);
}

bool needs_embeddings(const std::vector<Method>& methods) {
  return std::any_of(methods.begin(), methods.end(), [](Method m) { return m == Method::rss || m == Method::oc; });
}

int cmd_select(const Options& o, std::ostream& out) {
  require_file(o.corpus, "--corpus");
  if (o.out.empty()) throw ValidationError("--out is required");
  if (o.methods.size() != 1) throw ValidationError("select takes exactly one --method");
  const Method method = parse_method(o.methods[0]);
  if ((method == Method::rss || method == Method::oc) && o.embeddings.empty()) {
    throw ValidationError("embeddings required for method " + std::string(to_string(method)) + " (--embeddings)");
  }
  if (!o.embeddings.empty()) require_file(o.embeddings, "--embeddings");
  validate_common(o);

  const Corpus corpus = load_corpus(o.corpus);
  std::optional<EmbeddingSet> emb;
  if (!o.embeddings.empty()) emb = load_embeddings(o.embeddings);
  const SelectorConfig cfg = selector_config(o, method, corpus.size());
  const SelectionOrder order = select_order(corpus, emb ? &*emb : nullptr, cfg, o.threads);
  save_selection(order, o.out);

  ordered_json meta = base_meta("select");
  meta["inputs"]["corpus"] = input_ref(o.corpus);
  if (!o.embeddings.empty()) meta["inputs"]["embeddings"] = input_ref(o.embeddings);
  meta["params"] = selector_params(o, {method});
  meta["params_fingerprint"] = order.params_fingerprint;
  meta["n"] = order.ranked_ids.size();
  meta["truncated"] = order.truncated;
  std::ofstream m(o.out + ".meta.json", std::ios::binary | std::ios::trunc);
  if (!m) throw IoError("cannot write " + o.out + ".meta.json");
  m << meta.dump(2) << '\n';

  out << fmt::format("method={} n={} truncated={} fingerprint={}\n", to_string(method), order.ranked_ids.size(),
                     order.truncated, order.params_fingerprint);
  return kExitOk;
}

std::vector<Method> default_methods(const Options& o) {
  if (!o.methods.empty()) return parse_methods(o.methods);
  if (o.embeddings.empty()) return {Method::random, Method::lls};
  return {Method::random, Method::rss, Method::oc, Method::lls};
}

int cmd_simulate(const Options& o, std::ostream& out) {
  require_file(o.corpus, "--corpus");
  const std::vector<Method> methods = default_methods(o);
  if (needs_embeddings(methods)) require_file(o.embeddings, "--embeddings (embeddings required for rss/oc)");
  validate_common(o);
  const bool as_json = wants_json(o);

  const Corpus corpus = load_corpus(o.corpus);
  (void)label_set_of(corpus);
  std::optional<EmbeddingSet> emb;
  if (needs_embeddings(methods)) emb = load_embeddings(o.embeddings);

  const auto runs = build_runs(o, methods, corpus, emb ? &*emb : nullptr);
  const SweepReport report = sweep(corpus, runs, o.n_shots, o.threads);

  ordered_json meta = base_meta("simulate");
  meta["inputs"]["corpus"] = input_ref(o.corpus);
  if (emb) meta["inputs"]["embeddings"] = input_ref(o.embeddings);
  meta["params"] = selector_params(o, methods);
  meta["params"]["n_shots"] = o.n_shots;
  meta["params"]["repeats"] = o.repeats;
  meta["runs"] = runs_meta(runs);

  if (as_json) {
    ordered_json doc = {{"meta", meta}, {"rows", to_json(report)}};
    emit(o, out, doc.dump(2) + "\n");
  } else {
    emit(o, out, text_header(meta) + to_text(report));
  }
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  require_file(o.corpus, "--corpus");
  require_file(o.test_file, "--test-file");
  require_file(o.embeddings, "--embeddings");
  const std::vector<Method> methods = default_methods(o);
  validate_common(o);
  const bool as_json = wants_json(o);

  const Corpus pool = load_corpus(o.corpus);
  const Corpus test = load_corpus(o.test_file);
  const EmbeddingSet emb = load_embeddings(o.embeddings);
  (void)label_set_of(pool);

  const auto runs = build_runs(o, methods, pool, &emb);
  const Rq2Report report = rq2_experiment(pool, test, emb, runs, o.n_shots, o.threads);

  ordered_json meta = base_meta("evaluate");
  meta["inputs"]["corpus"] = input_ref(o.corpus);
  meta["inputs"]["test"] = input_ref(o.test_file);
  meta["inputs"]["embeddings"] = input_ref(o.embeddings);
  meta["params"] = selector_params(o, methods);
  meta["params"]["n_shots"] = o.n_shots;
  meta["params"]["repeats"] = o.repeats;
  meta["params"]["classifier"] = "nearest_centroid;similarity=cosine";
  meta["runs"] = runs_meta(runs);

  if (as_json) {
    ordered_json doc = {{"meta", meta}, {"rows", to_json(report)}};
    emit(o, out, doc.dump(2) + "\n");
  } else {
    emit(o, out, text_header(meta) + to_text(report));
  }
  return kExitOk;
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted.store(true); }

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  require_file(o.corpus, "--corpus");
  if (!o.embeddings.empty()) require_file(o.embeddings, "--embeddings");
  if (!o.ui_dir.empty() && !fs::is_directory(o.ui_dir)) throw ValidationError("--ui-dir: no such directory '" + o.ui_dir + "'");
  if (o.port < 0 || o.port > 65535) throw ValidationError("--port must lie in [0, 65535]");

  ServiceOptions so;
  so.journal = o.journal;
  so.threads = o.threads;
  so.background_threshold = o.background_threshold;
  AnnotationService service(so);
  auto corpus = std::make_shared<const Corpus>(load_corpus(o.corpus));
  service.add_corpus("default", corpus);
  const std::string stem = fs::path(o.corpus).stem().string();
  if (stem != "default") service.add_corpus(stem, corpus);
  if (!o.embeddings.empty()) {
    auto emb = std::make_shared<const EmbeddingSet>(load_embeddings(o.embeddings));
    service.add_embeddings("default", emb);
    const std::string emb_stem = fs::path(o.embeddings).stem().string();
    if (emb_stem != "default") service.add_embeddings(emb_stem, emb);
  }
  const std::size_t restored = service.recover();
  if (restored > 0) spdlog::info("restored {} session(s) from {}", restored, o.journal);

  httplib::Server server;
  // httplib enables SO_REUSEPORT by default, which would let a second
  // server share a busy port silently.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  install_routes(server, service, o.ui_dir.empty() ? std::nullopt : std::optional<fs::path>(o.ui_dir));
  int port = o.port;
  if (port == 0) {
    port = server.bind_to_any_port(o.host);
    if (port < 0) {
      err << "error: cannot bind " << o.host << "\n";
      return kExitRuntime;
    }
  } else if (!server.bind_to_port(o.host, port)) {
    err << "error: port " << port << " is in use or unavailable\n";
    return kExitRuntime;
  }

  g_interrupted.store(false);
  auto previous_int = std::signal(SIGINT, on_signal);
  auto previous_term = std::signal(SIGTERM, on_signal);
  std::jthread watcher([&server](std::stop_token st) {
    while (!st.stop_requested() && !g_interrupted.load()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    server.stop();
  });

  out << "listening on http://" << o.host << ":" << port << std::endl;
  const bool ok = server.listen_after_bind();
  watcher.request_stop();
  watcher.join();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);

  service.wait_idle();
  service.flush();
  out << "shutdown: journal flushed" << std::endl;
  return ok || g_interrupted.load() ? kExitOk : kExitRuntime;
}

int cmd_synth(const Options& o, std::ostream& out) {
  if (o.out_dir.empty()) throw ValidationError("--out-dir is required");
  BlobSpec spec;
  spec.class_counts = o.counts;
  spec.test_counts = o.test_counts;
  spec.dim = o.dim;
  spec.separation = o.separation;
  spec.spread = o.spread;
  spec.seed = o.seed;
  spec.validate();
  const SyntheticData data = make_blobs(spec);
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  save_corpus(data.pool, dir / "pool.jsonl");
  if (!data.test.empty()) save_corpus(data.test, dir / "test.jsonl");
  save_embeddings(data.embeddings, dir / "embeddings.emb");
  out << fmt::format("wrote {} pool, {} test documents, dim {} to {}\n", data.pool.size(), data.test.size(), spec.dim,
                     o.out_dir);
  return kExitOk;
}

void add_selector_flags(CLI::App* cmd, Options& o, bool method_list) {
  auto* m = cmd->add_option("--method", o.methods,
                            method_list ? "Methods, comma separated: random,rss,oc,lls" : "random|rss|oc|lls");
  if (method_list) m->delimiter(',');
  cmd->add_option("--beta", o.beta, "LLS BLEU threshold in [0,1]")->capture_default_str();
  cmd->add_option("--lls-mode", o.lls_mode, "previous|all")->capture_default_str();
  cmd->add_option("--min-cluster-size", o.min_cluster_size, "HDBSCAN minimum cluster size");
  cmd->add_option("--min-samples", o.min_samples, "HDBSCAN core-distance neighbourhood, self included");
  cmd->add_option("--seed", o.seed, "Base seed; repeat i uses seed+i")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads, 0 for all cores")->capture_default_str();
}

void add_sweep_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--n-shots", o.n_shots, "Per-class targets, comma separated")->delimiter(',')->capture_default_str();
  cmd->add_option("--repeats", o.repeats, "Runs per stochastic method")->capture_default_str();
  cmd->add_option("--out", o.out, "Output file; stdout when omitted");
  cmd->add_option("--format", o.format, "text|json; defaults to json for *.json outputs");
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  configure_logging();
  Options o;
  CLI::App app{"Informed data selection for cold-start annotation", "idsel"};
  app.require_subcommand(1);
  app.set_version_flag("--version", IDSEL_VERSION);

  auto* select = app.add_subcommand("select", "Write a ranked selection order");
  select->add_option("--corpus", o.corpus, "Corpus JSONL")->required();
  select->add_option("--embeddings", o.embeddings, "Embedding file");
  select->add_option("--out", o.out, "Selection JSONL")->required();
  add_selector_flags(select, o, false);

  auto* simulate = app.add_subcommand("simulate", "Simulated annotation sweep reporting overannotation rates");
  simulate->add_option("--corpus", o.corpus, "Labelled corpus JSONL")->required();
  simulate->add_option("--embeddings", o.embeddings, "Embedding file (rss, oc)");
  add_selector_flags(simulate, o, true);
  add_sweep_flags(simulate, o);

  auto* evaluate = app.add_subcommand("evaluate", "Nearest-centroid evaluation of selected training sets");
  evaluate->add_option("--corpus", o.corpus, "Labelled selection pool JSONL")->required();
  evaluate->add_option("--test-file", o.test_file, "Labelled held-out JSONL")->required();
  evaluate->add_option("--embeddings", o.embeddings, "Embeddings covering pool and test")->required();
  add_selector_flags(evaluate, o, true);
  add_sweep_flags(evaluate, o);

  auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  serve->add_option("--corpus", o.corpus, "Corpus JSONL, registered as \"default\"")->required();
  serve->add_option("--embeddings", o.embeddings, "Embedding file, registered as \"default\"");
  serve->add_option("--port", o.port, "TCP port; 0 picks a free one")->capture_default_str();
  serve->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve->add_option("--journal", o.journal, "Append-only session journal");
  serve->add_option("--ui-dir", o.ui_dir, "Static UI bundle served at /");
  serve->add_option("--background-threshold", o.background_threshold,
                    "Corpora larger than this are ordered in the background")
      ->capture_default_str();
  serve->add_option("--threads", o.threads, "Worker threads, 0 for all cores")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled blob corpus");
  synth->add_option("--out-dir", o.out_dir, "Output directory")->required();
  synth->add_option("--counts", o.counts, "Pool documents per class")->delimiter(',')->capture_default_str();
  synth->add_option("--test-counts", o.test_counts, "Held-out documents per class")->delimiter(',');
  synth->add_option("--dim", o.dim, "Embedding dimension")->capture_default_str();
  synth->add_option("--separation", o.separation, "Norm of class means")->capture_default_str();
  synth->add_option("--spread", o.spread, "Per-coordinate standard deviation")->capture_default_str();
  synth->add_option("--seed", o.seed, "Generator seed")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    o.threads = resolve_threads(o.threads);
    if (select->parsed()) return cmd_select(o, out);
    if (simulate->parsed()) return cmd_simulate(o, out);
    if (evaluate->parsed()) return cmd_evaluate(o, out);
    if (serve->parsed()) return cmd_serve(o, out, err);
    if (synth->parsed()) return cmd_synth(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace idsel
