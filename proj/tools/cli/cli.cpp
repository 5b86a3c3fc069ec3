#include "cli.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "emojivoice/agent.hpp"
#include "emojivoice/audio.hpp"
#include "emojivoice/emoji_text.hpp"
#include "emojivoice/error.hpp"
#include "emojivoice/eval_stats.hpp"
#include "emojivoice/external_backend.hpp"
#include "emojivoice/fs_util.hpp"
#include "emojivoice/recorder.hpp"
#include "emojivoice/server.hpp"
#include "emojivoice/stream.hpp"
#include "emojivoice/synth.hpp"
#include "emojivoice/voice_registry.hpp"

namespace emojivoice::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Options {
  // global
  bool json_output = false;
  std::uint64_t seed = 0;
  std::vector<std::string> registry_files;
  std::string speaker;
  std::string backend = "parametric";
  std::string endpoint;
  bool verbose = false;

  // say
  std::string say_text;
  std::string say_out;

  // script
  std::string script_file;
  std::string script_out_dir;
  std::string script_report;
  bool script_realtime = false;

  // bench
  std::string bench_corpus;
  std::string bench_report;

  // stats
  std::string stats_table;
  std::vector<std::size_t> stats_chisq;
  std::vector<std::size_t> stats_bootstrap;
  double stats_level = 0.95;
  std::size_t stats_iterations = stats::kDefaultBootstrapIterations;

  // record
  std::string rec_dir;
  std::string rec_prompts;
  std::size_t rec_max = kPromptsPerEmoji;
  std::string rec_emoji;
  std::size_t rec_index = 0;
  std::string rec_wav;
  double rec_min_seconds = kMinSecondsPerEmoji;
  std::size_t rec_train = kDefaultTrainCount;
  std::size_t rec_val = kDefaultValCount;

  // serve
  std::string serve_host = "127.0.0.1";
  bool serve_allow_external = false;
  int serve_port = server::kDefaultPort;
  int serve_threads = 4;
  std::string serve_console_dir;
  bool serve_no_realtime = false;
  std::string asr_url;
  std::string chat_url;

  // agent
  std::vector<std::string> agent_wavs;
  std::string agent_out_dir;
  std::string agent_system_prompt;
};

struct Commands {
  CLI::App* say = nullptr;
  CLI::App* script = nullptr;
  CLI::App* bench = nullptr;
  CLI::App* stats = nullptr;
  CLI::App* record = nullptr;
  CLI::App* rec_init = nullptr;
  CLI::App* rec_next = nullptr;
  CLI::App* rec_import = nullptr;
  CLI::App* rec_audit = nullptr;
  CLI::App* rec_split = nullptr;
  CLI::App* rec_template = nullptr;
  CLI::App* serve = nullptr;
  CLI::App* agent = nullptr;
};

Commands build(CLI::App& app, Options& o) {
  app.description("Emoji-prompted expressive speech synthesis toolkit.");
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  app.add_flag("--json", o.json_output, "Machine-readable JSON output");
  app.add_option("--seed", o.seed, "Seed for every stochastic step");
  app.add_option("--registry", o.registry_files,
                 "Voice registry YAML file(s); replaces the shipped voices (env EMOJIVOICE_REGISTRY)")
      ->envname("EMOJIVOICE_REGISTRY")
      ->check(CLI::ExistingFile);
  app.add_option("--speaker", o.speaker, "Speaker registry to use (default: first registry)");
  app.add_option("--backend", o.backend, "Synthesis backend")->check(CLI::IsMember({"parametric", "external"}));
  app.add_option("--endpoint", o.endpoint, "host:port of the external backend");
  app.add_flag("-v,--verbose", o.verbose, "Debug logging");

  Commands c;
  c.say = app.add_subcommand("say", "Synthesize one emoji-annotated phrase");
  c.say->add_option("text", o.say_text, "Phrase, optionally ending in an emoji")->required();
  c.say->add_option("-o,--out", o.say_out, "Write the WAV here");

  c.script = app.add_subcommand("script", "Stream a whole script, one phrase at a time");
  c.script->add_option("file", o.script_file, "UTF-8 script file")->required();
  c.script->add_option("--out-dir", o.script_out_dir, "Write one WAV per phrase into this directory");
  c.script->add_option("--report", o.script_report, "Write the RTF report (JSON) here");
  c.script->add_flag("--realtime", o.script_realtime, "Pace output in wall-clock time with pauses");

  c.bench = app.add_subcommand("bench", "Real-time-factor benchmark over a phrase corpus");
  c.bench->add_option("--corpus", o.bench_corpus, "One phrase per line")->required();
  c.bench->add_option("--report", o.bench_report, "Write the RTF report (JSON) here");

  c.stats = app.add_subcommand("stats", "ANOVA, Tukey HSD, chi-squared and bootstrap on summary data");
  c.stats->add_option("table", o.stats_table, "Summary table: [measure,]label,n,mean,sd");
  c.stats->add_option("--chisq", o.stats_chisq, "Observed counts for a goodness-of-fit test against uniform")
      ->delimiter(',');
  c.stats->add_option("--bootstrap", o.stats_bootstrap, "First-choice counts for bootstrap intervals")
      ->delimiter(',');
  c.stats->add_option("--level", o.stats_level, "Confidence level for --bootstrap")->check(CLI::Range(0.5, 0.9999));
  c.stats->add_option("--iterations", o.stats_iterations, "Bootstrap resamples (>= 1000)");

  c.record = app.add_subcommand("record", "Prompt-recording sessions and training manifests");
  c.record->require_subcommand(1);
  c.rec_init = c.record->add_subcommand("init", "Create a session from a prompt file");
  c.rec_init->add_option("--dir", o.rec_dir, "Session directory")->required();
  c.rec_init->add_option("--prompts", o.rec_prompts, "Prompt file with [emoji] sections")
      ->required()
      ->check(CLI::ExistingFile);
  c.rec_init->add_option("--max-per-emoji", o.rec_max, "Prompts kept per emoji");
  c.rec_next = c.record->add_subcommand("next", "Show the next prompt without a recording");
  c.rec_next->add_option("--dir", o.rec_dir, "Session directory")->required();
  c.rec_import = c.record->add_subcommand("import", "Attach a recorded WAV to a prompt");
  c.rec_import->add_option("--dir", o.rec_dir, "Session directory")->required();
  c.rec_import->add_option("--emoji", o.rec_emoji, "Target emoji of the prompt")->required();
  c.rec_import->add_option("--index", o.rec_index, "Prompt index within the emoji (0-based)")->required();
  c.rec_import->add_option("--wav", o.rec_wav, "Recorded WAV file")->required()->check(CLI::ExistingFile);
  c.rec_audit = c.record->add_subcommand("audit", "Recorded duration per emoji");
  c.rec_audit->add_option("--dir", o.rec_dir, "Session directory")->required();
  c.rec_audit->add_option("--min-seconds", o.rec_min_seconds, "Minimum seconds per emoji");
  c.rec_split = c.record->add_subcommand("split", "Write train.txt / val.txt manifests");
  c.rec_split->add_option("--dir", o.rec_dir, "Session directory")->required();
  c.rec_split->add_option("--train", o.rec_train, "Training rows per emoji");
  c.rec_split->add_option("--val", o.rec_val, "Validation rows per emoji");
  c.rec_template = c.record->add_subcommand("prompt-template", "Print the phrase-drafting instruction for an emoji");
  c.rec_template->add_option("emoji", o.rec_emoji, "Target emoji")->required();

  c.serve = app.add_subcommand("serve", "Run the HTTP/WebSocket server");
  c.serve->add_option("--host", o.serve_host, "Bind address");
  c.serve->add_flag("--allow-external", o.serve_allow_external, "Permit a non-loopback bind address");
  c.serve->add_option("--port", o.serve_port, "TCP port; 0 picks a free one")->check(CLI::Range(0, 65535));
  c.serve->add_option("--threads", o.serve_threads, "I/O threads")->check(CLI::PositiveNumber);
  c.serve->add_option("--console-dir", o.serve_console_dir, "Static files served under /console/")
      ->check(CLI::ExistingDirectory);
  c.serve->add_flag("--no-realtime", o.serve_no_realtime, "Do not hold operator items for the clip duration");
  c.serve->add_option("--asr-url", o.asr_url, "ASR endpoint for /v1/agent (env EMOJIVOICE_ASR_URL)");
  c.serve->add_option("--chat-url", o.chat_url, "Chat endpoint for /v1/agent (env EMOJIVOICE_CHAT_URL)");

  c.agent = app.add_subcommand("agent", "Push-to-talk conversation in the terminal");
  c.agent->add_option("--wav", o.agent_wavs, "Captured takes, used in order (one per turn)")
      ->required()
      ->check(CLI::ExistingFile);
  c.agent->add_option("--out-dir", o.agent_out_dir, "Write each spoken reply as turn_NNN.wav");
  c.agent->add_option("--system-prompt", o.agent_system_prompt, "Override the generated system prompt");
  c.agent->add_option("--asr-url", o.asr_url, "ASR endpoint (env EMOJIVOICE_ASR_URL)");
  c.agent->add_option("--chat-url", o.chat_url, "Chat endpoint (env EMOJIVOICE_CHAT_URL)");
  return c;
}

class CommandTree : public CLI::App {
 public:
  CommandTree() : CLI::App("", "emojivoice") { commands = build(*this, options); }
  Options options;
  Commands commands;
};

// ---------------------------------------------------------------------------

class ValidationError : public Error {
 public:
  using Error::Error;
};

struct Context {
  const Options& o;
  std::ostream& out;
  std::ostream& err;
  RegistrySet registries;
  server::BackendFactory backends;
};

RegistrySet load_registries(const Options& o) {
  if (o.registry_files.empty()) return RegistrySet::shipped();
  RegistrySet set;
  for (const auto& f : o.registry_files) set.add(load_registry_file(f));
  return set;
}

server::BackendFactory make_backends(const Options& o) {
  if (o.backend == "external") {
    if (o.endpoint.empty()) throw ValidationError("backend external requires --endpoint host:port");
    Endpoint ep = parse_endpoint(o.endpoint);
    return [ep](std::shared_ptr<const StyleRegistry>) { return std::make_unique<ExternalBackend>(ep); };
  }
  return [](std::shared_ptr<const StyleRegistry> reg) { return std::make_unique<ParametricBackend>(std::move(reg)); };
}

std::string style_label(const StyleRegistry& reg, int id) {
  const VoiceStyle* s = reg.find(id);
  return s ? fmt::format("{} {} ({})", id, s->emoji.utf8(), s->name) : std::to_string(id);
}

std::string fallback_note(const StyleRegistry& reg, const StyleResolution& res, const std::optional<EmojiToken>& e) {
  switch (res.fallback) {
    case Fallback::None: return {};
    case Fallback::NoEmoji: return fmt::format("no trailing emoji; default style {} used", style_label(reg, res.style_id));
    case Fallback::UnknownEmoji:
      return fmt::format("emoji {} is not in the {} registry; default style {} used", e ? e->utf8() : "?",
                         reg.speaker_name(), style_label(reg, res.style_id));
  }
  return {};
}

json row_json(const RtfRow& r) {
  return json{{"phrase_index", r.phrase_index}, {"style_id", r.style_id},
              {"fallback", to_string(r.fallback)}, {"audio_seconds", r.audio_seconds},
              {"synth_seconds", r.synth_seconds}, {"rtf", r.rtf},
              {"play_start", r.play_start},       {"play_end", r.play_end},
              {"gap_before", r.gap_before}};
}

json report_json(const RtfReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows) rows.push_back(row_json(r));
  json j{{"rows", rows}, {"complete", rep.complete()}};
  j["mean_rtf"] = rep.rows.empty() ? json(nullptr) : json(rep.mean_rtf());
  j["max_rtf"] = rep.rows.empty() ? json(nullptr) : json(rep.max_rtf());
  j["error"] = rep.error ? json(*rep.error) : json(nullptr);
  return j;
}

int cmd_say(Context& c) {
  auto reg = c.registries.get(c.o.speaker);
  TrailingEmoji parsed = extract_trailing_emoji(c.o.say_text);
  if (parsed.clean_text.empty()) throw ValidationError("no speakable text");
  StyleResolution res = resolve(*reg, parsed.emoji);
  auto backend = c.backends(reg);
  AudioClip clip = backend->synthesize(SynthRequest{parsed.clean_text, res.style_id, c.o.seed});
  if (!c.o.say_out.empty()) write_wav(c.o.say_out, clip);
  double rtf = compute_rtf(clip.duration(), clip.synth_wall_time);
  std::string note = fallback_note(*reg, res, parsed.emoji);
  if (c.o.json_output) {
    json j{{"text", parsed.clean_text},
           {"speaker", reg->speaker_name()},
           {"style_id", res.style_id},
           {"fallback", to_string(res.fallback)},
           {"audio_seconds", clip.duration()},
           {"synth_seconds", clip.synth_wall_time},
           {"rtf", rtf}};
    j["out"] = c.o.say_out.empty() ? json(nullptr) : json(c.o.say_out);
    c.out << j.dump() << '\n';
  } else {
    if (!note.empty()) c.out << "note: " << note << '\n';
    c.out << fmt::format("{} | style {} | audio {:.3f} s | synth {:.3f} s | rtf {:.4f}\n", reg->speaker_name(),
                         style_label(*reg, res.style_id), clip.duration(), clip.synth_wall_time, rtf);
    c.out << (c.o.say_out.empty() ? std::string("not written (use --out FILE)") : "wrote " + c.o.say_out) << '\n';
  }
  return kOk;
}

class FileSink final : public PlaybackSink {
 public:
  explicit FileSink(std::optional<fs::path> dir) : dir_(std::move(dir)) {}

  void play(const PlaybackItem& item) override {
    if (!dir_) return;
    auto path = *dir_ / fmt::format("phrase_{:03d}.wav", item.phrase_index + 1);
    write_wav(path, item.clip);
    written.push_back(path.string());
  }

  std::vector<std::string> written;

 private:
  std::optional<fs::path> dir_;
};

int cmd_script(Context& c) {
  auto reg = c.registries.get(c.o.speaker);
  Script script = load_script(c.o.script_file);
  if (script.phrases.empty()) throw ValidationError("no phrases in " + c.o.script_file);

  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < script.phrases.size(); ++i) {
    const auto& p = script.phrases[i];
    StyleResolution res = resolve(*reg, p.style_emoji);
    if (res.fallback == Fallback::UnknownEmoji)
      warnings.push_back(fmt::format("phrase {} (line {}): {}", i + 1, p.source_line,
                                     fallback_note(*reg, res, p.style_emoji)));
  }

  std::optional<fs::path> dir;
  if (!c.o.script_out_dir.empty()) {
    dir = c.o.script_out_dir;
    fs::create_directories(*dir);
  }
  FileSink sink(dir);
  auto backend = c.backends(reg);
  StreamOptions opts;
  opts.pace = c.o.script_realtime;
  opts.seed = c.o.seed;
  RtfReport report = stream_script(script, *reg, *backend, sink, opts);
  json rj = report_json(report);
  if (!c.o.script_report.empty()) write_file_atomic(c.o.script_report, rj.dump(2) + "\n");

  if (c.o.json_output) {
    json j{{"speaker", reg->speaker_name()}, {"phrases", script.phrases.size()}, {"report", rj},
           {"warnings", warnings}, {"wavs", sink.written}};
    c.out << j.dump() << '\n';
  } else {
    for (const auto& w : warnings) c.err << "warning: " << w << '\n';
    for (const auto& r : report.rows) {
      const auto& p = script.phrases[r.phrase_index];
      c.out << fmt::format("{:3d} | style {:2d} | audio {:6.3f} s | synth {:6.3f} s | rtf {:.4f} | {}\n",
                           r.phrase_index + 1, r.style_id, r.audio_seconds, r.synth_seconds, r.rtf, p.clean_text);
    }
    if (!report.rows.empty())
      c.out << fmt::format("{} phrases, mean rtf {:.4f}, max rtf {:.4f}\n", report.rows.size(), report.mean_rtf(),
                           report.max_rtf());
    if (dir) c.out << "wrote " << sink.written.size() << " WAV files to " << dir->string() << '\n';
  }
  if (report.error) {
    c.err << "error: synthesis stopped: " << *report.error << '\n';
    return kRuntime;
  }
  return kOk;
}

int cmd_bench(Context& c) {
  auto reg = c.registries.get(c.o.speaker);
  std::string text = read_file(c.o.bench_corpus);
  std::vector<std::string> phrases;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    phrases.push_back(line);
  }
  if (phrases.empty()) throw ValidationError("no phrases in " + c.o.bench_corpus);

  auto backend = c.backends(reg);
  RtfReport report;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    TrailingEmoji parsed = extract_trailing_emoji(phrases[i]);
    if (parsed.clean_text.empty()) throw ValidationError(fmt::format("corpus line {}: no speakable text", i + 1));
    StyleResolution res = resolve(*reg, parsed.emoji);
    AudioClip clip = backend->synthesize(SynthRequest{parsed.clean_text, res.style_id, c.o.seed + i});
    RtfRow& row = report.add(i, clip.duration(), clip.synth_wall_time);
    row.style_id = res.style_id;
    row.fallback = res.fallback;
  }
  json rj = report_json(report);
  rj["backend"] = backend->name();
  if (!c.o.bench_report.empty()) write_file_atomic(c.o.bench_report, rj.dump(2) + "\n");
  if (c.o.json_output) {
    c.out << rj.dump() << '\n';
  } else {
    double audio = 0.0;
    double synth = 0.0;
    for (const auto& r : report.rows) {
      audio += r.audio_seconds;
      synth += r.synth_seconds;
    }
    c.out << fmt::format("backend {} | {} phrases | audio {:.2f} s | synth {:.3f} s\n", backend->name(),
                         report.rows.size(), audio, synth);
    c.out << fmt::format("mean rtf {:.5f} | max rtf {:.5f} | {}\n", report.mean_rtf(), report.max_rtf(),
                         report.mean_rtf() < 1.0 ? "faster than real time" : "slower than real time");
  }
  return kOk;
}

json anova_json(const stats::MeasureReport& r) {
  json groups = json::array();
  for (const auto& g : r.table.groups)
    groups.push_back(json{{"label", g.label}, {"n", g.n}, {"mean", g.mean}, {"sd", g.sd}});
  json tukey = json::array();
  for (const auto& p : r.tukey)
    tukey.push_back(json{{"higher", p.group_a},
                         {"lower", p.group_b},
                         {"mean_diff", p.mean_diff},
                         {"q", p.q_stat},
                         {"p", p.p_value},
                         {"label", stats::format_p(p.p_value)}});
  return json{{"measure", r.table.measure},
              {"groups", groups},
              {"df_between", r.anova.df_between},
              {"df_within", r.anova.df_within},
              {"f", r.anova.f_stat},
              {"p", r.anova.p_value},
              {"p_label", stats::format_p(r.anova.p_value)},
              {"ms_within", r.anova.ms_within},
              {"omega_sq", r.anova.omega_sq},
              {"tukey", tukey}};
}

int cmd_stats(Context& c) {
  const Options& o = c.o;
  if (o.stats_table.empty() && o.stats_chisq.empty() && o.stats_bootstrap.empty())
    throw ValidationError("give a summary table, --chisq or --bootstrap");
  json j = json::object();
  std::ostringstream text;
  if (!o.stats_table.empty()) {
    auto tables = stats::parse_summary_table(read_file(o.stats_table));
    std::vector<stats::MeasureReport> reports;
    for (const auto& t : tables) reports.push_back(stats::analyse(t));
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(anova_json(r));
    j["anova"] = arr;
    text << stats::format_report(reports);
  }
  if (!o.stats_chisq.empty()) {
    std::vector<double> uniform(o.stats_chisq.size(), 1.0);
    auto r = stats::chisq_gof(o.stats_chisq, uniform);
    j["chisq"] = json{{"observed", o.stats_chisq}, {"chi2", r.chi2}, {"df", r.df}, {"p", r.p_value}};
    text << fmt::format("chi-squared {:.3f} | df {} | p {:.3g} {}\n", r.chi2, r.df, r.p_value,
                        stats::format_p(r.p_value));
  }
  if (!o.stats_bootstrap.empty()) {
    auto r = stats::bootstrap_preference(o.stats_bootstrap, o.stats_level, o.stats_iterations, o.seed);
    json opts = json::array();
    for (const auto& op : r.options) {
      opts.push_back(json{{"option", op.option}, {"count", op.count}, {"share", op.share},
                          {"ci_low", op.ci_low}, {"ci_high", op.ci_high}});
      text << fmt::format("option {} | count {} | share {:.3f} | {:.0f}% CI [{:.3f}, {:.3f}]\n", op.option + 1,
                          op.count, op.share, r.level * 100.0, op.ci_low, op.ci_high);
    }
    json verdicts = json::array();
    for (const auto& v : r.verdicts) {
      verdicts.push_back(json{{"winner", v.winner}, {"loser", v.loser}, {"support", v.support},
                              {"dominant", v.dominant}});
      if (v.dominant)
        text << fmt::format("option {} over option {} at {:.1f}% (support {:.4f})\n", v.winner + 1, v.loser + 1,
                            r.level * 100.0, v.support);
    }
    j["bootstrap"] = json{{"level", r.level}, {"iterations", r.iterations}, {"seed", o.seed},
                          {"generator", "mt19937_64"}, {"options", opts}, {"verdicts", verdicts}};
  }
  if (o.json_output)
    c.out << j.dump() << '\n';
  else
    c.out << text.str();
  return kOk;
}

int cmd_record(Context& c, const Commands& cmds) {
  const Options& o = c.o;
  fs::path dir = o.rec_dir;
  if (cmds.rec_template->parsed()) {
    parse_single_emoji(o.rec_emoji);
    std::string t(kPromptGenerationTemplate);
    auto pos = t.find('X');
    t.replace(pos, 1, o.rec_emoji);
    if (o.json_output)
      c.out << json{{"prompt", t}}.dump() << '\n';
    else
      c.out << t << '\n';
    return kOk;
  }
  if (cmds.rec_init->parsed()) {
    auto reg = c.registries.get(o.speaker);
    PromptSession s = build_session(read_file(o.rec_prompts), reg->speaker_name(), emoji_set_from(*reg), o.rec_max);
    fs::create_directories(dir);
    save_session(s, dir);
    if (o.json_output)
      c.out << json{{"dir", dir.string()}, {"speaker", s.speaker_name}, {"emojis", s.emoji_set.size()},
                    {"prompts", s.total_prompts()}}.dump()
            << '\n';
    else
      c.out << fmt::format("session for {} in {}: {} emojis, {} prompts\n", s.speaker_name, dir.string(),
                           s.emoji_set.size(), s.total_prompts());
    return kOk;
  }
  PromptSession s = load_session(dir);
  if (cmds.rec_next->parsed()) {
    for (std::size_t ei = 0; ei < s.emoji_set.size(); ++ei) {
      const auto& phrases = s.prompts.at(s.emoji_set[ei].emoji);
      for (std::size_t pi = 0; pi < phrases.size(); ++pi) {
        if (s.recordings.contains({ei, pi})) continue;
        if (o.json_output)
          c.out << json{{"emoji", s.emoji_set[ei].emoji}, {"index", pi}, {"display", s.display_text(ei, pi)},
                        {"remaining", s.total_prompts() - s.recordings.size()}}.dump()
                << '\n';
        else
          c.out << s.display_text(ei, pi) << "\n(emoji " << s.emoji_set[ei].emoji << ", index " << pi << ", "
                << s.total_prompts() - s.recordings.size() << " remaining)\n";
        return kOk;
      }
    }
    c.out << (o.json_output ? json{{"remaining", 0}}.dump() : std::string("all prompts recorded")) << '\n';
    return kOk;
  }
  if (cmds.rec_import->parsed()) {
    std::size_t ei = s.emoji_index(o.rec_emoji);
    import_recording(s, dir, ei, o.rec_index, o.rec_wav);
    save_session(s, dir);
    const auto& rec = s.recordings.at({ei, o.rec_index});
    if (o.json_output)
      c.out << json{{"path", rec.relative_path}, {"duration_seconds", rec.duration_seconds}}.dump() << '\n';
    else
      c.out << fmt::format("stored {} ({:.2f} s)\n", rec.relative_path, rec.duration_seconds);
    return kOk;
  }
  if (cmds.rec_audit->parsed()) {
    AuditReport r = duration_audit(s, dir, o.rec_min_seconds);
    if (o.json_output) {
      json entries = json::array();
      for (const auto& e : r.entries) {
        json je{{"emoji", e.emoji}, {"recordings", e.recordings}, {"total_seconds", e.total_seconds}};
        je["shortfall_seconds"] = e.shortfall_seconds ? json(*e.shortfall_seconds) : json(nullptr);
        entries.push_back(je);
      }
      c.out << json{{"entries", entries}, {"warnings", r.warnings}}.dump() << '\n';
    } else {
      for (const auto& e : r.entries)
        c.out << fmt::format("{} | {:3d} recordings | {:7.1f} s{}\n", e.emoji, e.recordings, e.total_seconds,
                             e.shortfall_seconds ? fmt::format(" | short by {:.1f} s", *e.shortfall_seconds) : "");
      for (const auto& w : r.warnings) c.err << "warning: " << w << '\n';
    }
    return kOk;
  }
  if (cmds.rec_split->parsed()) {
    auto [train, val] = split_manifest(s, o.rec_train, o.rec_val, o.seed);
    write_file_atomic(dir / "train.txt", write_manifest(train));
    write_file_atomic(dir / "val.txt", write_manifest(val));
    if (o.json_output)
      c.out << json{{"train", train.rows.size()}, {"val", val.rows.size()}, {"seed", o.seed}}.dump() << '\n';
    else
      c.out << fmt::format("train.txt {} rows, val.txt {} rows (seed {})\n", train.rows.size(), val.rows.size(),
                           o.seed);
    return kOk;
  }
  throw ValidationError("record needs a subcommand");
}

server::AgentFactories agent_factories(const Options& o, bool required) {
  server::AgentFactories f;
  f.config.asr_endpoint = o.asr_url;
  f.config.chat_endpoint = o.chat_url;
  f.config.speaker = o.speaker;
  f.config.system_prompt = o.agent_system_prompt;
  f.config.apply_environment();
  if (f.config.asr_endpoint.empty() || f.config.chat_endpoint.empty()) {
    if (required) throw ValidationError("agent needs --asr-url and --chat-url (or EMOJIVOICE_ASR_URL / EMOJIVOICE_CHAT_URL)");
    return f;
  }
  f.config.validate();
  std::string asr = f.config.asr_endpoint;
  std::string chat = f.config.chat_endpoint;
  f.asr = [asr] { return std::make_unique<HttpAsrClient>(asr); };
  f.chat = [chat] { return std::make_unique<HttpChatClient>(chat); };
  return f;
}

int cmd_serve(Context& c) {
  const Options& o = c.o;
  server::ServerOptions so;
  so.bind_address = o.serve_host;
  so.allow_external = o.serve_allow_external;
  so.port = static_cast<std::uint16_t>(o.serve_port);
  so.threads = o.serve_threads;
  if (!o.serve_console_dir.empty()) so.console_dir = o.serve_console_dir;
  so.realtime_playback = !o.serve_no_realtime;
  so.seed = o.seed;
  auto agent = agent_factories(o, false);
  bool agent_enabled = static_cast<bool>(agent.asr);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  server::Server srv(so, std::move(c.registries), c.backends, std::move(agent));
  std::uint16_t port = srv.start();
  if (o.json_output)
    c.out << json{{"event", "ready"}, {"host", so.bind_address}, {"port", port}, {"agent", agent_enabled}}.dump()
          << std::endl;
  else
    c.out << "listening on " << so.bind_address << ":" << port << "\nready" << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  srv.stop();
  return kOk;
}

int cmd_agent(Context& c) {
  const Options& o = c.o;
  auto f = agent_factories(o, true);
  auto reg = c.registries.get(o.speaker);
  std::vector<fs::path> wavs(o.agent_wavs.begin(), o.agent_wavs.end());
  std::optional<fs::path> out_dir;
  if (!o.agent_out_dir.empty()) {
    out_dir = o.agent_out_dir;
    fs::create_directories(*out_dir);
  }
  std::size_t turn = 0;
  TurnObserver obs;
  obs.on_transcript = [&](const std::string& t) {
    if (!o.json_output) c.out << "you:   " << t << '\n';
  };
  obs.on_reply = [&](const TurnRecord& r) {
    if (!o.json_output) c.out << "agent: " << r.reply_raw << '\n';
  };
  obs.on_audio = [&](const AudioClip& clip, const TurnRecord&) {
    if (out_dir) write_wav(*out_dir / fmt::format("turn_{:03d}.wav", turn + 1), clip);
  };
  AgentSession session(f.config, reg, f.asr(), f.chat(), c.backends(reg),
                       std::make_unique<FileCaptureDevice>(wavs), obs);

  if (!o.json_output) c.err << "Press Enter to start talking, Enter again to stop; q quits.\n";
  int status = kOk;
  for (; turn < wavs.size(); ++turn) {
    std::string line;
    if (!std::getline(std::cin, line) || line == "q") break;
    session.press_talk();
    if (!o.json_output) c.err << "(recording)\n";
    if (!std::getline(std::cin, line)) line.clear();
    AudioClip take = session.release_talk();
    TurnResult r = session.run_turn(take);
    if (o.json_output) {
      json j{{"turn", turn + 1}, {"status", r.status == TurnStatus::Completed ? "completed" : "aborted"}};
      if (r.record) j["record"] = server::turn_record_json(*r.record);
      if (!r.error.empty()) j["error"] = r.error;
      c.out << j.dump() << '\n';
    } else if (r.status != TurnStatus::Completed) {
      c.err << "turn failed: " << r.error << '\n';
    } else if (r.record && r.record->fell_back()) {
      c.err << "note: " << to_string(r.record->fallback) << ", default style used\n";
    }
    if (r.status != TurnStatus::Completed) status = kRuntime;
    if (line == "q") {
      ++turn;
      break;
    }
  }
  return status;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const PreconditionError*>(&e) ||
      dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SchemaError*>(&e) ||
      dynamic_cast<const StyleError*>(&e) || dynamic_cast<const DecodeError*>(&e) ||
      dynamic_cast<const UniquenessError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const CountError*>(&e) || dynamic_cast<const UnsupportedDesignError*>(&e) ||
      dynamic_cast<const StateError*>(&e))
    return kValidation;
  return kRuntime;
}

}  // namespace

std::unique_ptr<CLI::App> describe() { return std::make_unique<CommandTree>(); }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CommandTree app;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }
  const Options& o = app.options;
  spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::warn);
  try {
    Context c{o, out, err, load_registries(o), make_backends(o)};
    const Commands& cmds = app.commands;
    if (cmds.say->parsed()) return cmd_say(c);
    if (cmds.script->parsed()) return cmd_script(c);
    if (cmds.bench->parsed()) return cmd_bench(c);
    if (cmds.stats->parsed()) return cmd_stats(c);
    if (cmds.record->parsed()) return cmd_record(c, cmds);
    if (cmds.serve->parsed()) return cmd_serve(c);
    if (cmds.agent->parsed()) return cmd_agent(c);
    err << "error: no command\n";
    return kValidation;
  } catch (const std::exception& e) {
    int code = classify(e);
    if (o.json_output)
      out << json{{"error", e.what()}, {"exit_code", code}}.dump() << '\n';
    err << "error: " << e.what() << '\n';
    return code;
  }
}

}  // namespace emojivoice::cli
