// stagelens command line: ingest, run, synth, serve, export.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

// Eigen before httplib: resolv.h defines a _res macro that breaks Eigen.
#include "stagelens/bundle.hpp"
#include "stagelens/digest.hpp"
#include "stagelens/service.hpp"
#include "stagelens/synth.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace fs = std::filesystem;
using namespace stagelens;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;
constexpr int kExitAddress = 3;
constexpr int kExitNotReady = 4;

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

bool check_file(const fs::path& p) {
  if (fs::is_regular_file(p)) return true;
  std::cerr << "error: cannot read " << p.string() << "\n";
  return false;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

void print_summary(const RunArtifacts& art, const std::string& digest, const fs::path& bundle_path) {
  std::printf("users %zu  windows %zu  segments %zu  stages %zu  patterns %zu\n", art.dataset.sequences.size(),
              art.dataset.window_count(), art.segments.size(), art.stages.stages.size(), art.patterns.size());
  std::printf("\n%-6s %10s %8s\n", "stage", "positivity", "members");
  for (const auto& s : art.stages.stages) std::printf("%-6d %10.4f %8zu\n", s.stage_id, s.positivity, s.members.size());

  std::vector<const StagePattern*> top;
  for (const auto& p : art.patterns)
    if (p.impact) top.push_back(&p);
  std::stable_sort(top.begin(), top.end(), [](const StagePattern* a, const StagePattern* b) {
    return std::abs(a->impact->d_i) > std::abs(b->impact->d_i);
  });
  if (top.size() > 10) top.resize(10);
  std::printf("\n%-12s %8s %8s %8s %10s\n", "pattern", "f_r", "f_d", "w", "d_i");
  for (const auto* p : top)
    std::printf("%-12s %8.3f %8.3f %8.3f %10.4f\n", pattern_key(p->symbols).c_str(), p->f_r, p->f_d, p->w,
                p->impact->d_i);
  std::printf("\nbundle %s\nsha256 %s\n", bundle_path.string().c_str(), digest.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior stage analytics: segmentation, stage clustering and pattern impact"};
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse record files and report malformed lines and groups");
  fs::path posts, responses;
  std::optional<std::int64_t> split_time;
  ingest_cmd->add_option("--posts", posts, "Line-delimited post records")->required();
  ingest_cmd->add_option("--responses", responses, "Line-delimited response records")->required();
  ingest_cmd->add_option("--split-time", split_time, "Cohort split, seconds since epoch");

  // run
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline and write the export bundle");
  PipelineParams params;
  fs::path out_dir = "out";
  fs::path params_file;
  std::int64_t run_split = 0;
  run_cmd->add_option("--posts", posts, "Line-delimited post records")->required();
  run_cmd->add_option("--responses", responses, "Line-delimited response records")->required();
  run_cmd->add_option("--split-time", run_split, "Cohort split, seconds since epoch")->required();
  run_cmd->add_option("--params", params_file, "JSON object of parameter overrides, applied before flags");
  run_cmd->add_option("--window-days", params.window_days);
  run_cmd->add_option("--k-proactive", params.k_proactive);
  run_cmd->add_option("--k-reactive", params.k_reactive);
  run_cmd->add_option("--stages", params.n_stages);
  run_cmd->add_option("--lambda", params.lambda, "Stage feature mix of mean and variance");
  run_cmd->add_option("--lambda-reg", params.lambda_reg, "Covariance ridge for segmentation");
  run_cmd->add_option("--align-len", params.align_len);
  run_cmd->add_option("--min-support", params.min_support);
  run_cmd->add_option("--max-pattern-len", params.max_pattern_len);
  run_cmd->add_option("--cooccurrence-min-freq", params.cooccurrence_min_freq);
  run_cmd->add_option("--min-gain", params.min_gain, "Breakpoint cost as a multiple of the shuffled-sequence null gain");
  run_cmd->add_option("--max-segments", params.max_segments);
  run_cmd->add_option("--seed", params.seed);
  run_cmd->add_option("--out", out_dir, "Output directory");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate records from a synthetic spec");
  fs::path spec_file;
  fs::path synth_out = "synth";
  synth_cmd->add_option("spec", spec_file, "SynthSpec JSON")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve sessions over HTTP");
  std::string data_dir = env_or("STAGELENS_DATA_DIR", "data");
  std::string addr = env_or("STAGELENS_ADDR", "127.0.0.1:8080");
  int workers = std::atoi(env_or("STAGELENS_WORKERS", "2").c_str());
  std::optional<std::uint64_t> default_seed;
  if (const char* s = std::getenv("STAGELENS_SEED"); s && *s) default_seed = std::strtoull(s, nullptr, 10);
  serve_cmd->add_option("--data-dir", data_dir, "Session directory (STAGELENS_DATA_DIR)");
  serve_cmd->add_option("--addr", addr, "host:port to listen on (STAGELENS_ADDR)");
  serve_cmd->add_option("--workers", workers, "Concurrent pipeline runs (STAGELENS_WORKERS)")->check(CLI::Range(1, 64));
  serve_cmd->add_option("--seed", default_seed, "Seed for runs that set none (STAGELENS_SEED)");

  // export
  auto* export_cmd = app.add_subcommand("export", "Write the Ready bundle of a session");
  std::string session_id;
  std::optional<std::string> run_id;
  fs::path export_out;
  export_cmd->add_option("--data-dir", data_dir, "Session directory (STAGELENS_DATA_DIR)");
  export_cmd->add_option("--session", session_id)->required();
  export_cmd->add_option("--run", run_id, "Run id; default is the latest Ready run");
  export_cmd->add_option("--out", export_out, "Output file; stdout when omitted");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_cmd) {
      if (!check_file(posts) || !check_file(responses)) return kExitInput;
      IngestResult in;
      try {
        in = ingest(posts, responses);
      } catch (const IngestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
      }
      std::printf("posts      %zu records, %zu malformed of %zu lines\n", in.posts.size(), in.posts_report.malformed,
                  in.posts_report.lines);
      std::printf("responses  %zu records, %zu malformed of %zu lines\n", in.responses.size(),
                  in.responses_report.malformed, in.responses_report.lines);
      for (const auto& s : in.posts_report.samples) std::printf("  posts: %s\n", s.c_str());
      for (const auto& s : in.responses_report.samples) std::printf("  responses: %s\n", s.c_str());
      std::printf("sha256 posts %s\nsha256 responses %s\n", in.posts_digest.c_str(), in.responses_digest.c_str());
      if (split_time) {
        const auto g = assign_groups(in.posts, *split_time);
        std::map<std::string, int> counts;
        for (const auto& [u, grp] : g.groups) ++counts[std::string(to_string(grp))];
        for (const auto& [name, n] : counts) std::printf("group %-14s %d\n", name.c_str(), n);
        std::printf("dropped (silent after split) %zu\n", g.dropped.size());
      }
      return 0;
    }

    if (*run_cmd) {
      if (!check_file(posts) || !check_file(responses)) return kExitInput;
      if (!params_file.empty()) {
        if (!check_file(params_file)) return kExitInput;
        std::ifstream in(params_file);
        const PipelineParams from_file = params_from_json(Json::parse(in));
        // Flags given on the command line win over the file.
        PipelineParams merged = from_file;
        const PipelineParams defaults;
        auto pick = [&](auto PipelineParams::*field) {
          if (!(params.*field == defaults.*field)) merged.*field = params.*field;
        };
        pick(&PipelineParams::window_days);
        pick(&PipelineParams::k_proactive);
        pick(&PipelineParams::k_reactive);
        pick(&PipelineParams::n_stages);
        pick(&PipelineParams::lambda);
        pick(&PipelineParams::lambda_reg);
        pick(&PipelineParams::align_len);
        pick(&PipelineParams::min_support);
        pick(&PipelineParams::max_pattern_len);
        pick(&PipelineParams::cooccurrence_min_freq);
        pick(&PipelineParams::min_gain);
        pick(&PipelineParams::max_segments);
        pick(&PipelineParams::seed);
        params = merged;
      }
      try {
        validate(params);
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
      }
      IngestResult in;
      try {
        in = ingest(posts, responses);
      } catch (const IngestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
      }
      PipelineInput input{std::move(in.posts), std::move(in.responses), run_split, in.posts_digest,
                          in.responses_digest};
      const RunArtifacts art = run_pipeline(input, params);
      const std::string text = dump_bundle(bundle_json(art));
      fs::create_directories(out_dir);
      const fs::path bundle_path = out_dir / "bundle.json";
      std::ofstream(bundle_path, std::ios::binary | std::ios::trunc) << text;
      print_summary(art, sha256_hex(text), bundle_path);
      return 0;
    }

    if (*synth_cmd) {
      SynthSpec spec;
      try {
        if (!fs::is_regular_file(spec_file)) throw SynthSpecError("cannot read synth spec " + spec_file.string());
        spec = load_synth_spec(spec_file);
        const SynthOutput out = generate(spec);
        write_synth(spec, out, synth_out);
        std::printf("users %zu  posts %zu  responses %zu  split_time %lld\n", out.users.size(), out.posts.size(),
                    out.responses.size(), static_cast<long long>(out.split_time));
        for (const auto& p : out.planted)
          std::printf("planted %-10s f_r %.3f f_d %.3f w %.3f\n", pattern_key(p.pattern).c_str(), p.f_r, p.f_d, p.w);
        std::printf("wrote %s\n", synth_out.string().c_str());
      } catch (const SynthSpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
      }
      return 0;
    }

    if (*serve_cmd) {
      const auto colon = addr.rfind(':');
      if (colon == std::string::npos) {
        std::cerr << "error: --addr must be host:port\n";
        return kExitInput;
      }
      const std::string host = addr.substr(0, colon);
      const int port = std::atoi(addr.substr(colon + 1).c_str());
      SessionStore store(data_dir, workers, default_seed);
      httplib::Server server;
      mount_routes(server, store);
      // The library default sets SO_REUSEPORT, which lets a second server share a busy port.
      server.set_socket_options([](auto sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
      });
      if (!server.bind_to_port(host, port)) {
        std::cerr << "error: cannot listen on " << addr << " (address in use?)\n";
        return kExitAddress;
      }
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << addr << ", data in " << data_dir << "\n";
      server.listen_after_bind();
      return 0;
    }

    if (*export_cmd) {
      std::string text;
      try {
        text = read_ready_bundle(data_dir, session_id, run_id);
      } catch (const ServiceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.http_status == 409 ? kExitNotReady : kExitInput;
      }
      if (export_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(export_out, std::ios::binary | std::ios::trunc) << text;
        std::printf("sha256 %s\n", sha256_hex(text).c_str());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
