#include "gwkit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gwkit/compositing.hpp"
#include "gwkit/error.hpp"
#include "gwkit/facegeom.hpp"
#include "gwkit/gromov.hpp"
#include "gwkit/image_io.hpp"
#include "gwkit/io.hpp"
#include "gwkit/losses.hpp"
#include "gwkit/pipeline.hpp"
#include "gwkit/sinkhorn.hpp"

namespace gwkit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Contraction is O(n^3) per outer iteration; beyond this, say so.
constexpr Index kLargeProblem = 4096;

ordered_json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return roundSignificant(v);
}

ordered_json matrixJson(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json header(const char* command) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["command"] = command;
  return doc;
}

ordered_json candidatesJson(const CandidateSelection& sel) {
  ordered_json list = ordered_json::array();
  for (const auto& c : sel.candidates) {
    list.push_back({{"frame_id", c.frameId}, {"similarity", number(c.similarity)}});
  }
  return list;
}

// ---- settings: flags > config file > built-ins ------------------------------

struct Flags {
  std::optional<std::string> config;
  std::optional<double> epsilon;
  std::optional<int> maxOuter;
  std::optional<int> maxSinkhorn;
  std::optional<double> tol;
  int logDomain = 0;
  std::optional<int> topM;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::string> lambdas;
  std::optional<int> jobs;
};

const std::set<std::string>& knownKeys() {
  static const std::set<std::string> keys{"epsilon", "max_outer", "max_sinkhorn", "tol",
                                          "log_domain", "top_m", "alpha", "beta",
                                          "lambdas", "jobs"};
  return keys;
}

double parseDouble(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw InputError("setting '" + key + "': expected a number, got '" + text + "'");
  }
  return v;
}

int parseInt(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw InputError("setting '" + key + "': expected an integer, got '" + text + "'");
  }
  return v;
}

bool parseBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InputError("setting '" + key + "': expected true or false, got '" + text + "'");
}

std::vector<double> parseList(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string item = text.substr(pos, comma - pos);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    out.push_back(parseDouble(key, item));
    pos = comma + 1;
  }
  return out;
}

class Settings {
 public:
  Settings(const Flags& flags, KeyValueConfig file)
      : flags_(flags), file_(std::move(file)) {}

  SolverConfig solver() const {
    SolverConfig cfg;
    if (flags_.epsilon) {
      cfg.epsilon = *flags_.epsilon;
    } else if (const auto v = fileValue("epsilon")) {
      cfg.epsilon = parseDouble("epsilon", *v);
    }
    cfg.maxOuterIters = integer("max_outer", flags_.maxOuter, cfg.maxOuterIters);
    cfg.maxSinkhornIters = integer("max_sinkhorn", flags_.maxSinkhorn, cfg.maxSinkhornIters);
    cfg.marginalTol = real("tol", flags_.tol, cfg.marginalTol);
    if (flags_.logDomain > 0) {
      cfg.logDomain = true;
    } else if (const auto v = fileValue("log_domain")) {
      cfg.logDomain = parseBool("log_domain", *v);
    }
    cfg.validate();
    return cfg;
  }

  int topM() const {
    const int m = integer("top_m", flags_.topM, 3);
    if (m < 1) throw InputError("top-m must be at least 1");
    return m;
  }

  int jobs() const {
    const int j = integer("jobs", flags_.jobs, 1);
    if (j < 1) throw InputError("jobs must be at least 1");
    return j;
  }

  BlendWeights blend(int m) const {
    BlendWeights w = BlendWeights::uniform(m);
    w.alpha = real("alpha", flags_.alpha, w.alpha);
    w.beta = real("beta", flags_.beta, w.beta);
    if (flags_.lambdas) {
      w.lambdas = parseList("lambdas", *flags_.lambdas);
    } else if (const auto v = fileValue("lambdas")) {
      w.lambdas = parseList("lambdas", *v);
    }
    if (w.lambdas.size() != static_cast<std::size_t>(m)) {
      throw InputError("expected " + std::to_string(m) + " lambdas, got " +
                       std::to_string(w.lambdas.size()));
    }
    w.validate();
    return w;
  }

 private:
  std::optional<std::string> fileValue(const std::string& key) const {
    const auto it = file_.find(key);
    if (it == file_.end()) return std::nullopt;
    return it->second;
  }

  int integer(const std::string& key, const std::optional<int>& flag, int fallback) const {
    if (flag) return *flag;
    if (const auto v = fileValue(key)) return parseInt(key, *v);
    return fallback;
  }

  double real(const std::string& key, const std::optional<double>& flag,
              double fallback) const {
    if (flag) return *flag;
    if (const auto v = fileValue(key)) return parseDouble(key, *v);
    return fallback;
  }

  Flags flags_;
  KeyValueConfig file_;
};

KeyValueConfig loadSettingsFile(const std::optional<std::string>& flag) {
  std::string path;
  if (flag) {
    path = *flag;
  } else if (const char* env = std::getenv("GWKIT_CONFIG"); env != nullptr) {
    path = env;
  }
  if (path.empty()) return {};
  KeyValueConfig kv = loadKeyValueConfig(path);
  for (const auto& [key, value] : kv) {
    if (!knownKeys().count(key)) throw InputError(path + ": unknown setting '" + key + "'");
  }
  return kv;
}

// ---- subcommands -------------------------------------------------------------

struct Paths {
  std::string cost, mu, nu, x, y, planOut;
  std::string query, database, faceDir, generated, out;
  std::string frame, crops;
  std::vector<std::string> residuals;
  std::string fg, bg, mask;
  std::string ref, test;
  std::string scores;
  std::string manifest;
  bool timings = false;
};

DiscreteDistribution weightsOrUniform(const std::string& path, Index n) {
  return path.empty() ? uniformDistribution(n) : loadDistribution(path);
}

int sinkhornCommand(const Paths& p, const Settings& s, std::ostream& out, std::ostream& err) {
  const Matrix cost = loadCsvMatrix(p.cost);
  const auto mu = weightsOrUniform(p.mu, cost.rows());
  const auto nu = weightsOrUniform(p.nu, cost.cols());
  const SinkhornResult r = sinkhornSolve(cost, mu, nu, s.solver());

  ordered_json doc = header("sinkhorn");
  doc["epsilon"] = number(r.epsilon);
  doc["log_domain"] = r.logDomain;
  doc["iterations"] = r.iterations;
  doc["converged"] = r.converged;
  doc["marginal_error"] = number(r.marginalError);
  doc["transport_cost"] = number(linearTransportCost(cost, r.coupling.plan));
  if (p.planOut.empty()) {
    doc["plan"] = matrixJson(r.coupling.plan);
  } else {
    saveCsvMatrix(p.planOut, r.coupling.plan);
    doc["plan_path"] = p.planOut;
  }
  out << doc.dump(2) << '\n';
  if (!r.converged) {
    err << "gwkit: Sinkhorn stopped after " << r.iterations
        << " iterations with marginal error " << r.marginalError << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int gwCommand(const Paths& p, const Settings& s, std::ostream& out, std::ostream& err) {
  const FeatureBatch x = loadFeatureBatch(p.x);
  const FeatureBatch y = loadFeatureBatch(p.y);
  if (x.size() > kLargeProblem || y.size() > kLargeProblem) {
    err << "gwkit: warning: " << x.size() << " x " << y.size()
        << " points; each outer iteration costs O(n^3)\n";
  }
  const auto mu = weightsOrUniform(p.mu, x.size());
  const auto nu = weightsOrUniform(p.nu, y.size());
  const GWResult r = gwSolve(x, y, mu, nu, s.solver());

  ordered_json doc = header("gw");
  doc["transport_cost"] = number(r.transportCost);
  doc["entropic_objective"] = number(r.entropicObjective);
  doc["epsilon"] = number(r.epsilon);
  doc["converged"] = r.converged && r.projectionConverged;
  doc["outer_iterations"] = r.outerIterations;
  doc["projection_error"] = number(r.projectionError);
  if (p.planOut.empty()) {
    doc["plan"] = matrixJson(r.coupling.plan);
  } else {
    saveCsvMatrix(p.planOut, r.coupling.plan);
    doc["plan_path"] = p.planOut;
  }
  out << doc.dump(2) << '\n';
  if (!r.converged) {
    err << "gwkit: outer iteration limit reached after " << r.outerIterations << " steps\n";
    return kExitNumerical;
  }
  if (!r.projectionConverged) {
    err << "gwkit: last Sinkhorn projection stopped at marginal error " << r.projectionError
        << "; plan rounded onto the marginals\n";
    return kExitNumerical;
  }
  return kExitOk;
}

CandidateSelection search(const Paths& p, int m) {
  const FaceVectorField query = vectorField(loadLandmarks(p.query));
  return topMCandidates(query, buildFaceDatabase(loadLandmarkDatabase(p.database)), m);
}

int faceSearchCommand(const Paths& p, const Settings& s, std::ostream& out, std::ostream&) {
  const CandidateSelection sel = search(p, s.topM());
  ordered_json doc = header("face-search");
  doc["candidates"] = candidatesJson(sel);
  doc["truncated"] = sel.truncated;
  out << doc.dump(2) << '\n';
  return kExitOk;
}

int faceBlendCommand(const Paths& p, const Settings& s, std::ostream& out, std::ostream& err) {
  const int m = s.topM();
  BlendWeights w = s.blend(m);
  const CandidateSelection sel = search(p, m);
  if (sel.candidates.empty()) throw InputError(p.database + ": face database is empty");
  if (sel.truncated) {
    err << "gwkit: warning: only " << sel.candidates.size() << " of " << m
        << " candidates available; lambdas rescaled\n";
    w = w.truncated(sel.candidates.size());
  }
  const fs::path faceDir =
      p.faceDir.empty() ? fs::path(p.database).parent_path() : fs::path(p.faceDir);
  std::vector<RasterImage> faces;
  for (const auto& c : sel.candidates) faces.push_back(loadPng(faceDir / (c.frameId + ".png")));
  savePng(p.out, blendFace(faces, loadPng(p.generated), w));

  ordered_json doc = header("face-blend");
  doc["candidates"] = candidatesJson(sel);
  doc["truncated"] = sel.truncated;
  ordered_json lambdas = ordered_json::array();
  for (const double l : w.lambdas) lambdas.push_back(number(l));
  doc["alpha"] = number(w.alpha);
  doc["beta"] = number(w.beta);
  doc["lambdas"] = lambdas;
  doc["output"] = p.out;
  out << doc.dump(2) << '\n';
  return kExitOk;
}

std::map<int, fs::path> parseResiduals(const std::vector<std::string>& entries) {
  std::map<int, fs::path> out;
  for (const auto& entry : entries) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size()) {
      throw InputError("--residual expects PART=PATH, got '" + entry + "'");
    }
    const int part = parseInt("residual", entry.substr(0, eq));
    if (part < 1 || part > 5) throw InputError("residual part index must be 1..5");
    if (!out.emplace(part, entry.substr(eq + 1)).second) {
      throw InputError("residual for part " + std::to_string(part) + " given twice");
    }
  }
  return out;
}

int composeCommand(const Paths& p, const Settings&, std::ostream& out, std::ostream&) {
  const RasterImage frame = loadPng(p.frame);
  const FrameCrops crops = loadCrops(p.crops);
  const auto residuals = parseResiduals(p.residuals);
  for (const auto& [part, path] : residuals) {
    const bool listed = std::any_of(crops.parts.begin(), crops.parts.end(),
                                    [part = part](const PartRect& r) { return r.index == part; });
    if (!listed) {
      throw InputError("residual for part " + std::to_string(part) + " has no crop rectangle");
    }
  }

  RasterImage composed = frame;
  ordered_json clamps = ordered_json::object();
  for (const auto& pr : crops.parts) {
    const BodyPartCrop crop = cropPart(frame, pr.index, pr.rect);
    const auto it = residuals.find(pr.index);
    const ResidualImage residual = it == residuals.end()
                                       ? ResidualImage(crop.image.width(), crop.image.height())
                                       : loadResidualPng(it->second);
    std::size_t clamped = 0;
    composed = pasteCrop(composed, applyResidual(crop, residual, &clamped));
    clamps[std::to_string(pr.index)] = clamped;
  }
  savePng(p.out, composed);

  ordered_json doc = header("compose");
  doc["frame_id"] = crops.frameId;
  doc["residual_clamps"] = clamps;
  doc["output"] = p.out;
  out << doc.dump(2) << '\n';
  return kExitOk;
}

int fuseCommand(const Paths& p, const Settings&, std::ostream& out, std::ostream&) {
  savePng(p.out, fuse(loadPng(p.fg), loadPng(p.bg), loadMaskPng(p.mask)));
  ordered_json doc = header("fuse");
  doc["output"] = p.out;
  out << doc.dump(2) << '\n';
  return kExitOk;
}

int metricsCommand(const Paths& p, const Settings&, std::ostream& out, std::ostream&) {
  const RasterImage ref = loadPng(p.ref);
  const RasterImage test = loadPng(p.test);
  ordered_json doc = header("metrics");
  doc["ssim"] = number(ssim(ref, test));
  doc["psnr"] = number(psnr(ref, test));
  out << doc.dump(2) << '\n';
  return kExitOk;
}

int lossCommand(const Paths& p, const Settings&, std::ostream& out, std::ostream&) {
  const auto records = loadScores(p.scores);
  const LossTerms terms = evaluateLosses(records);
  const auto term = [](const std::optional<double>& v) {
    return v ? number(*v) : ordered_json(nullptr);
  };
  ordered_json doc = header("loss");
  doc["records"] = records.size();
  doc["spatial"] = term(terms.spatial);
  doc["temporal"] = term(terms.temporal);
  doc["local"] = term(terms.local);
  doc["objective"] = number(weightedObjective(terms, LossWeights{}));
  out << doc.dump(2) << '\n';
  return kExitOk;
}

int pipelineCommand(const Paths& p, const Settings& s, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  cfg.topM = s.topM();
  cfg.weights = s.blend(cfg.topM);
  cfg.jobs = s.jobs();
  const auto manifests = loadManifests(p.manifest);
  std::optional<fs::path> outDir;
  if (!p.out.empty()) {
    outDir = p.out;
    fs::create_directories(*outDir);
  }
  const SequenceSummary summary = processSequence(manifests, cfg, outDir);
  out << summaryJson(summary, p.timings) << '\n';
  if (summary.failures > 0) {
    for (const auto& f : summary.frames) {
      if (!f.ok) err << "gwkit: frame " << f.frameId << " failed at " << f.failedStage << ": "
                     << f.error << '\n';
    }
    return kExitPartial;
  }
  return kExitOk;
}

// ---- option wiring -----------------------------------------------------------

void addConfig(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value settings file (default: $GWKIT_CONFIG)");
}

void addSolver(CLI::App* cmd, Flags& f) {
  cmd->add_option("--epsilon", f.epsilon, "entropic regularization (default 0.01 x mean cost)");
  cmd->add_option("--max-outer", f.maxOuter, "GW outer iteration limit (200)");
  cmd->add_option("--max-sinkhorn", f.maxSinkhorn, "Sinkhorn iteration limit (10000)");
  cmd->add_option("--tol", f.tol, "marginal / outer-change tolerance (1e-9)");
  cmd->add_flag("--log-domain", f.logDomain, "force the log-domain Sinkhorn");
}

void addBlend(CLI::App* cmd, Flags& f) {
  cmd->add_option("--alpha", f.alpha, "weight of the candidate blend (0.5)");
  cmd->add_option("--beta", f.beta, "weight of the generated face (0.5)");
  cmd->add_option("--lambdas", f.lambdas, "comma-separated candidate weights (uniform)");
}

void addTopM(CLI::App* cmd, Flags& f) {
  cmd->add_option("--top-m", f.topM, "number of database candidates (3)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropic Gromov-Wasserstein transport and frame compositing tools", "gwkit"};
  app.require_subcommand(1);
  Flags flags;
  Paths p;
  std::map<CLI::App*, std::function<int(const Settings&)>> handlers;
  const auto bind = [&](CLI::App* cmd, auto fn) {
    addConfig(cmd, flags);
    handlers[cmd] = [&, fn](const Settings& s) { return fn(p, s, out, err); };
  };

  auto* sk = app.add_subcommand("sinkhorn", "entropic OT plan for a cost matrix CSV");
  sk->add_option("--cost", p.cost, "cost matrix CSV")->required();
  sk->add_option("--mu", p.mu, "row weights CSV (uniform)");
  sk->add_option("--nu", p.nu, "column weights CSV (uniform)");
  sk->add_option("--plan-out", p.planOut, "write the plan as CSV instead of JSON");
  addSolver(sk, flags);
  bind(sk, sinkhornCommand);

  auto* gw = app.add_subcommand("gw", "entropic Gromov-Wasserstein between two feature batches");
  gw->add_option("--x", p.x, "feature CSV, one row per point")->required();
  gw->add_option("--y", p.y, "feature CSV, one row per point")->required();
  gw->add_option("--mu", p.mu, "weights of x (uniform)");
  gw->add_option("--nu", p.nu, "weights of y (uniform)");
  gw->add_option("--plan-out", p.planOut, "write the plan as CSV instead of JSON");
  addSolver(gw, flags);
  bind(gw, gwCommand);

  auto* fs = app.add_subcommand("face-search", "top-m database faces by orientation similarity");
  fs->add_option("--query", p.query, "landmarks JSON of the generated face")->required();
  fs->add_option("--database", p.database, "landmark database JSON array")->required();
  addTopM(fs, flags);
  bind(fs, faceSearchCommand);

  auto* fb = app.add_subcommand("face-blend", "blend the top-m database faces into a face crop");
  fb->add_option("--query", p.query, "landmarks JSON of the generated face")->required();
  fb->add_option("--database", p.database, "landmark database JSON array")->required();
  fb->add_option("--face-dir", p.faceDir, "directory of <frame_id>.png faces (database dir)");
  fb->add_option("--generated", p.generated, "generated face crop PNG")->required();
  fb->add_option("--out", p.out, "output PNG")->required();
  addTopM(fb, flags);
  addBlend(fb, flags);
  bind(fb, faceBlendCommand);

  auto* co = app.add_subcommand("compose", "add part residuals and paste them into a frame");
  co->add_option("--frame", p.frame, "frame PNG")->required();
  co->add_option("--crops", p.crops, "crop rectangles JSON")->required();
  co->add_option("--residual", p.residuals, "PART=PATH 16-bit residual PNG (repeatable)");
  co->add_option("--out", p.out, "output PNG")->required();
  bind(co, composeCommand);

  auto* fu = app.add_subcommand("fuse", "mask-select foreground over background");
  fu->add_option("--fg", p.fg, "foreground PNG")->required();
  fu->add_option("--bg", p.bg, "background PNG")->required();
  fu->add_option("--mask", p.mask, "mask PNG (> 127 selects foreground)")->required();
  fu->add_option("--out", p.out, "output PNG")->required();
  bind(fu, fuseCommand);

  auto* me = app.add_subcommand("metrics", "SSIM and PSNR of a test image against a reference");
  me->add_option("--ref", p.ref, "reference PNG")->required();
  me->add_option("--test", p.test, "test PNG")->required();
  bind(me, metricsCommand);

  auto* lo = app.add_subcommand("loss", "adversarial loss terms from discriminator scores");
  lo->add_option("--scores", p.scores, "scores CSV")->required();
  bind(lo, lossCommand);

  auto* pi = app.add_subcommand("pipeline", "run the compositing pipeline over frame manifests");
  pi->add_option("--manifest", p.manifest, "manifest JSON array")->required();
  pi->add_option("--out", p.out, "output directory for frames and report.json");
  pi->add_flag("--timings", p.timings, "include per-stage timings in the report");
  pi->add_option("--jobs", flags.jobs, "frames processed concurrently (1)");
  addTopM(pi, flags);
  addBlend(pi, flags);
  bind(pi, pipelineCommand);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "gwkit: " << e.what() << "\n\n";
    const auto used = app.get_subcommands();
    err << (used.empty() ? app.help() : used.front()->help());
    return kExitInput;
  }

  try {
    const Settings settings(flags, loadSettingsFile(flags.config));
    return handlers.at(app.get_subcommands().front())(settings);
  } catch (const NumericalError& e) {
    err << "gwkit: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "gwkit: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace gwkit::cli
