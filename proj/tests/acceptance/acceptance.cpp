// Acceptance checks for the curriculum augmentation loop. Prints one
// PASS/FAIL line per criterion and exits nonzero if any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cda/augmenter.hpp"
#include "cda/dataset_io.hpp"
#include "cda/evaluator.hpp"
#include "cda/pipeline.hpp"
#include "cda/report.hpp"
#include "metric_oracle.hpp"
#include "synthetic.hpp"
#include "world.hpp"

using namespace cda;
using namespace cda::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

Verdict ok(std::string detail) { return {true, std::move(detail)}; }
Verdict fail(std::string detail) { return {false, std::move(detail)}; }

struct Scratch {
  fs::path root;
  explicit Scratch(std::string_view name) : root(fresh_dir(name)) {}
  ~Scratch() { fs::remove_all(root); }
};

Dataset pool() { return synthetic_dataset(100, 100, 10); }

RunState run(const RunConfig& c, const World& w, const fs::path& dir,
             const RunHooks& hooks = {}) {
  auto b = w.backends(dir);
  return run_cda(c, pool(), dir, b, hooks);
}

std::string join(const std::vector<std::string>& v, std::size_t limit = 3) {
  std::string out;
  for (std::size_t i = 0; i < v.size() && i < limit; ++i) out += (i ? "; " : "") + v[i];
  if (v.size() > limit) out += fmt::format("; +{} more", v.size() - limit);
  return out;
}

// Percent in hundredths, half away from zero, by integer long division.
std::string pct_oracle(std::uint64_t num, std::uint64_t den) {
  const auto scaled = num * 10000;
  auto q = scaled / den;
  if ((scaled % den) * 2 >= den) ++q;
  return fmt::format("{}.{:02}", q / 100, q % 100);
}

std::string fixture(const std::string& name) {
  std::ifstream in(fs::path(CDA_FIXTURE_DIR) / "prompts" / name, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- criteria

Verdict conformance() {
  Scratch s("acc_conformance");
  const auto start = std::chrono::steady_clock::now();
  const auto state = run(mock_config(3, 100), level_world(1, {9, 10}), s.root / "run");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto problems = check_data_flow(s.root / "run");
  if (state.records.size() != 3) return fail(fmt::format("{} iterations", state.records.size()));
  if (!problems.empty()) return fail(join(problems));
  if (secs >= 10.0) return fail(fmt::format("took {:.2f} s", secs));
  std::string sizes;
  for (const auto& r : state.records) {
    sizes += fmt::format(" |D{}|={} wrong={} aug={}", r.index - 1, r.dataset_size, r.wrong_count,
                         r.aug_size);
  }
  return ok(fmt::format("3 iterations in {:.2f} s;{}", secs, sizes));
}

// Round-I construction: 3000 M + 3000 L, the base student right on 2306 M
// and 1811 L; generation prompts declined at a rate fit so that the expected
// growth is 5416 of the 3 * 1883 possible.
struct RoundOne {
  Scratch scratch{"acc_round_one"};
  RunState state;
  RunReport report;
  Dataset pool;
  CorrectnessMap correct;
};

const RoundOne& round_one() {
  static RoundOne r = [] {
    RoundOne out;
    out.pool = synthetic_dataset(3000, 3000, 1, 100000);
    std::unordered_set<std::string> right;
    std::size_t m = 0, l = 0;
    for (const auto& i : out.pool.instances) {
      const bool met = i.label == Label::metaphor;
      const bool is_right = met ? m++ < 2306 : l++ < 1811;
      out.correct[i.id] = is_right;
      if (is_right) right.insert(i.id);
    }
    const double reject = 1.0 - 5416.0 / (3.0 * (6000 - 4117));
    World w;
    w.teacher = oracle_teacher(reject);
    w.base_student = id_student(right);
    w.schedule = {mock_factory(level_student(99))};
    auto config = mock_config(1, 3000);
    const auto dir = out.scratch.root / "run";
    auto b = w.backends(dir);
    out.state = run_cda(config, out.pool, dir, b);
    out.report = report_run(dir, {}, 1, b);
    return out;
  }();
  return r;
}

Verdict round_one_stats() {
  const auto& r = round_one();
  const auto stats = compute_stats(r.pool, r.correct);
  const std::vector<std::string> expect{"50.00", "68.62", "56.01"};
  const std::vector<std::string> oracle{pct_oracle(3000, 6000), pct_oracle(4117, 6000),
                                        pct_oracle(2306, 4117)};
  if (oracle != expect) return fail("oracle disagrees with the expected row: " + join(oracle));
  const std::vector<std::string> got{stats.pct_metaphor.str(), stats.pct_correct->str(),
                                     stats.pct_correct_metaphor->str()};
  if (stats.n_instances != 6000 || got != expect) {
    return fail(fmt::format("compute_stats gave {} {}", stats.n_instances, join(got)));
  }
  if (r.report.iterations.size() != 1 || r.report.iterations[0].stats != stats) {
    return fail("report_run iteration row differs from compute_stats");
  }
  // The printed table row, token by token.
  std::istringstream text(render_text(r.report));
  std::vector<std::string> row;
  for (std::string line; std::getline(text, line);) {
    if (line.rfind("I ", 0) != 0) continue;
    std::istringstream tokens(line);
    for (std::string t; tokens >> t;) row.push_back(t);
    break;
  }
  const std::vector<std::string> printed{"I", "6000", "50.00", "68.62", "56.01"};
  if (row.size() < 5 || !std::equal(printed.begin(), printed.end(), row.begin())) {
    return fail("printed row: " + join(row, 6));
  }
  return ok("6000 / 50.00 / 68.62 / 56.01 from compute_stats, oracle and printed report row");
}

Verdict round_one_growth() {
  const auto& r = round_one();
  const auto& rec = r.state.records.at(0);
  const auto growth = rec.next_dataset_size - rec.dataset_size;
  const auto detail = fmt::format("wrong={} aug={} growth={} (target 5416, band [5200, 5700])",
                                  rec.wrong_count, rec.aug_size, growth);
  if (rec.wrong_count != 1883 || growth != rec.aug_size) return fail(detail);
  return growth >= 5200 && growth <= 5700 ? ok(detail) : fail(detail);
}

Verdict metric_oracle() {
  std::mt19937_64 rng(20240601);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto c = random_confusion(rng, 500);
    const auto e = brute_force_metrics(c);
    const auto g = compute_metrics(c);
    for (double d : {g.accuracy - e.accuracy, g.precision - e.precision, g.recall - e.recall,
                     g.f1 - e.f1}) {
      worst = std::max(worst, std::abs(d));
    }
  }
  if (worst > 1e-12) return fail(fmt::format("max deviation {:.3e}", worst));
  // No true positives: every ratio is 0, including the 0/0 ones.
  for (const ConfusionMatrix& c : {ConfusionMatrix{0, 0, 0, 7, 0}, ConfusionMatrix{0, 3, 4, 2, 0},
                                   ConfusionMatrix{0, 0, 0, 0, 5}}) {
    const auto m = compute_metrics(c);
    if (m.f1 != 0.0 || m.precision != 0.0 || m.recall != 0.0) {
      return fail(fmt::format("zero-denominator case gave f1={}", m.f1));
    }
  }
  return ok(fmt::format("1000 matrices, max deviation {:.3e}; zero-denominator F1 = 0", worst));
}

Verdict prompt_fidelity() {
  const auto met = make_instance("The news struck a nerve with the audience.", "struck",
                                 Label::metaphor, OriginalSource{"t", 0});
  const auto lit = make_instance("She struck the ball with a bat.", "struck", Label::literal,
                                 OriginalSource{"t", 0});
  std::vector<std::string> bad;
  for (auto m : kAllAugMethods) {
    const std::string name(to_string(m));
    const auto& seed = polarity(m) == Label::metaphor ? met : lit;
    if (aug_template(m) != fixture(name + ".template.txt")) bad.push_back(name + " template");
    if (render_aug_prompt(m, seed) != fixture(name + ".rendered.txt")) {
      bad.push_back(name + " rendered");
    }
  }
  if (render_question(met.sentence, met.target_word) != fixture("question.rendered.txt")) {
    bad.push_back("question");
  }
  const auto grasp = make_instance("He grasped the concept quickly.", "grasp", Label::metaphor,
                                   OriginalSource{"t", 0});
  const auto parsed =
      parse_generation(AugMethod::replace_target_met,
                       "New sentence: He digested the concept swiftly.\nNew word: digest", grasp, 1);
  const auto* acc = std::get_if<Accepted>(&parsed);
  if (!acc || acc->instance.target_word != "digested" ||
      acc->instance.sentence != "He digested the concept swiftly.") {
    bad.push_back("exemplar did not bind 'digested'");
  }
  if (!bad.empty()) return fail(join(bad, 8));
  return ok("7 prompts byte-identical to fixtures; exemplar binds 'digested'");
}

Verdict ablations() {
  Scratch s("acc_ablations");
  std::vector<std::string> bad;
  const auto world = level_world(1, {9, 10});
  auto note = [&](const std::string& name, const fs::path& dir) {
    for (const auto& p : check_data_flow(dir)) bad.push_back(name + ": " + p);
  };

  const auto base_dir = s.root / "default";
  const auto base = run(mock_config(2, 100), world, base_dir);
  note("default", base_dir);

  {
    auto c = mock_config(2, 100);
    c.train_on = TrainOn::all;
    const auto dir = s.root / "train_all";
    const auto st = run(c, world, dir);
    note("train_on=all", dir);
    for (const auto& r : st.records) {
      if (load(dir, r.train_ref).ids() != load(dir, r.dataset_ref).ids()) {
        bad.push_back("train_on=all: train set is not D^{n-1}");
      }
    }
    if (st.records[0].train_size == base.records[0].train_size) {
      bad.push_back("train_on=all: train size unchanged");
    }
  }
  {
    auto c = mock_config(2, 100);
    c.augment_seed = AugmentSeed::all;
    const auto dir = s.root / "seed_all";
    const auto st = run(c, world, dir);
    note("augment_seed=all", dir);
    for (const auto& r : st.records) {
      if (load(dir, r.seeds_ref).ids() != load(dir, r.dataset_ref).ids()) {
        bad.push_back("augment_seed=all: seeds are not D^{n-1}");
      }
    }
    if (st.records[0].aug_size <= base.records[0].aug_size) {
      bad.push_back("augment_seed=all: no extra augmentation");
    }
  }
  {
    auto c = mock_config(2, 100);
    c.next_data = NextData::augmented_only;
    const auto dir = s.root / "aug_only";
    const auto st = run(c, world, dir);
    note("next_data=augmented_only", dir);
    const auto& r = st.records[0];
    if (load(dir, r.next_dataset_ref).ids() != load(dir, r.aug_ref).ids()) {
      bad.push_back("augmented_only: D^1 != Aug^1");
    }
  }
  {
    auto c = mock_config(2, 100);
    c.finetune_mode = FinetuneMode::from_scratch;
    const auto dir = s.root / "scratch";
    const auto st = run(c, world, dir);
    note("finetune_mode=from_scratch", dir);
    for (const auto& ck : load_checkpoints(dir)) {
      if (ck.id != "base" && ck.parent != std::optional<std::string>("base")) {
        bad.push_back("from_scratch: " + ck.id + " not parented to base");
      }
    }
    if (base.records[1].base_checkpoint_id == "base") {
      bad.push_back("default run trained iteration 2 from base");
    }
  }
  if (!bad.empty()) return fail(join(bad));
  return ok("train_on, augment_seed, next_data, finetune_mode each verified from persisted records");
}

struct Killed {};

Verdict resume_equivalence() {
  Scratch s("acc_resume");
  const auto world = level_world(1, {9, 10}, 0.1);
  const auto config = mock_config(3, 100);
  const auto ref_dir = s.root / "reference";
  run(config, world, ref_dir);
  const auto reference = snapshot(ref_dir);

  int boundaries = 0;
  std::vector<std::string> bad;
  for (int kill_at = 1;; ++kill_at) {
    const auto dir = s.root / fmt::format("kill_{}", kill_at);
    int seen = 0;
    RunHooks hooks;
    hooks.after_stage = [&](const StageEvent&) {
      if (++seen == kill_at) throw Killed{};
    };
    bool killed = false;
    try {
      run(config, world, dir, hooks);
    } catch (const Killed&) {
      killed = true;
    }
    if (!killed) {
      fs::remove_all(dir);
      break;
    }
    ++boundaries;
    // A fresh process: new backends and a trainer that only has its ledger.
    auto b = world.backends(dir);
    resume_cda(dir, b);
    if (snapshot(dir) != reference) bad.push_back(fmt::format("boundary {}", kill_at));
    fs::remove_all(dir);
  }
  if (boundaries != 2 + 4 * 3) bad.push_back(fmt::format("{} boundaries seen", boundaries));
  if (!bad.empty()) return fail("differs after " + join(bad));
  return ok(fmt::format("{} kill points, {} files byte-identical each time", boundaries,
                        reference.size()));
}

std::vector<std::string> fuzz_corpus(std::size_t n) {
  std::mt19937_64 rng(99);
  const std::vector<std::string> pieces{
      "Yes",  "No",         "yes.",          "NO!!",       "New sentence:", "New word:",
      "\n",   "\r\n",       "\"",            "'",          "**",            "Your sentence:",
      " ",    "struck",     "striking",      "digest",     "Target word:",  "Original sentence:",
      ".",    "Mr. Smith ", "\xc3\xa9",      "\xe2\x80\x9c", "\xff\xfe",    std::string(1, '\0'),
      "\t",   "{sentence}", "{target_word}", "...",        "?",             "The news struck."};
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const auto kind = rng() % 4;
    const auto len = rng() % (kind == 3 ? 5000 : 40);
    for (std::size_t k = 0; k < len; ++k) {
      if (kind == 0) {
        s += static_cast<char>(rng() % 256);
      } else if (kind == 1) {
        s += static_cast<char>(32 + rng() % 95);
      } else {
        s += pieces[rng() % pieces.size()];
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Runs in a child process so that an abort is observed rather than fatal.
Verdict parser_fuzz() {
  int pipe_fd[2];
  if (::pipe(pipe_fd) != 0) return fail("pipe failed");
  const pid_t pid = ::fork();
  if (pid < 0) return fail("fork failed");
  if (pid == 0) {
    ::close(pipe_fd[0]);
    const auto corpus = fuzz_corpus(10000);
    const auto met = make_instance("The news struck a nerve.", "struck", Label::metaphor,
                                   OriginalSource{"f", 0});
    const auto lit = make_instance("She struck the ball.", "struck", Label::literal,
                                   OriginalSource{"f", 0});
    std::size_t answers = 0, rejected = 0, accepted = 0, invalid = 0;
    for (const auto& raw : corpus) {
      answers += parse_answer(raw).kind == ParsedAnswer::Kind::unparseable;
      for (auto m : kAllAugMethods) {
        const auto outcome =
            parse_generation(m, raw, polarity(m) == Label::metaphor ? met : lit, 1);
        if (const auto* a = std::get_if<Accepted>(&outcome)) {
          ++accepted;
          if (validate_instance(a->instance)) ++invalid;
        } else {
          ++rejected;
        }
      }
    }
    const auto msg = fmt::format("{} {} {} {}", answers, accepted, rejected, invalid);
    [[maybe_unused]] auto w = ::write(pipe_fd[1], msg.data(), msg.size());
    ::_exit(0);
  }
  ::close(pipe_fd[1]);
  std::string msg;
  char buf[256];
  for (ssize_t n; (n = ::read(pipe_fd[0], buf, sizeof buf)) > 0;) msg.append(buf, std::size_t(n));
  ::close(pipe_fd[0]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    return fail(fmt::format("parser process died (status {})", status));
  }
  std::istringstream in(msg);
  std::size_t unparseable = 0, accepted = 0, rejected = 0, invalid = 0;
  in >> unparseable >> accepted >> rejected >> invalid;
  if (accepted + rejected != 60000) return fail("outcome count mismatch: " + msg);
  if (invalid) return fail(fmt::format("{} accepted outputs fail validation", invalid));
  return ok(fmt::format("10000 strings: {} unparseable answers; {} accepted / {} rejected "
                        "generations, all typed",
                        unparseable, accepted, rejected));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"loop conformance", conformance},
      {"round-I statistics arithmetic", round_one_stats},
      {"round-I growth", round_one_growth},
      {"metric oracle", metric_oracle},
      {"prompt fidelity", prompt_fidelity},
      {"ablation switches", ablations},
      {"resume equivalence", resume_equivalence},
      {"parser totality fuzz", parser_fuzz},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    fmt::print("{} {}: {}\n", v.pass ? "PASS" : "FAIL", name, v.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - std::size_t(failed), criteria.size());
  return failed ? 1 : 0;
}
