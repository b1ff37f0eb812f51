#include "broute/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "broute/errors.hpp"

namespace broute {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(',');
    out += fmt_double(values[i]);
  }
  return out;
}

double parse_double(std::string_view text, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw FormatError(std::string("bad ") + what + ": '" + std::string(text) +
                      "'");
  return v;
}

std::vector<double> parse_doubles(std::string_view text, const char* what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    out.push_back(parse_double(text.substr(start, comma - start), what));
    start = comma + 1;
    if (comma == text.size()) break;
  }
  return out;
}

long parse_long(std::string_view text, const char* what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw FormatError(std::string("bad ") + what + ": '" + std::string(text) +
                      "'");
  return v;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw FormatError("cannot write file: " + path.string());
  return out;
}

}  // namespace

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out = open_for_write(tmp);
    out << content;
    if (!out) throw FormatError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_raw_corpus(const std::filesystem::path& path,
                      const std::vector<RawTrajectory>& raws) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out = open_for_write(tmp);
    for (const RawTrajectory& raw : raws) {
      json turns = json::array();
      for (const RawTurn& turn : raw.turns) {
        json features = json::array();
        for (Eigen::Index i = 0; i < turn.features.size(); ++i)
          features.push_back(turn.features[i]);
        turns.push_back(json{{"action", action_index(turn.action)},
                             {"cost", turn.cost},
                             {"features", std::move(features)},
                             {"quality", turn.quality}});
      }
      json record{{"path", raw.path_id},
                  {"session", raw.session_id},
                  {"turns", std::move(turns)}};
      out << record.dump() << "\n";
    }
  }
  std::filesystem::rename(tmp, path);
}

std::vector<RawTrajectory> read_raw_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open raw corpus: " + path.string());
  std::vector<RawTrajectory> raws;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("raw corpus line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    try {
      RawTrajectory raw;
      raw.session_id = record.at("session").get<std::uint64_t>();
      raw.path_id = record.at("path").get<std::string>();
      for (const json& jt : record.at("turns")) {
        RawTurn turn;
        turn.action = jt.at("action").get<int>() == 0 ? Action::Weak
                                                      : Action::Strong;
        turn.cost = jt.at("cost").get<double>();
        turn.quality = jt.at("quality").get<double>();
        const auto& f = jt.at("features");
        turn.features.resize(static_cast<Eigen::Index>(f.size()));
        for (std::size_t i = 0; i < f.size(); ++i)
          turn.features[static_cast<Eigen::Index>(i)] = f[i].get<double>();
        raw.turns.push_back(std::move(turn));
      }
      raws.push_back(std::move(raw));
    } catch (const json::exception& e) {
      throw FormatError("raw corpus line " + std::to_string(lineno) +
                        " missing field: " + e.what());
    }
  }
  return raws;
}

void write_raw_manifest(const std::filesystem::path& path,
                        const RawCorpusManifest& m) {
  json j{{"config_digest", m.config_digest},
         {"env_seed", m.env_seed},
         {"feature_dim", m.feature_dim},
         {"horizon", m.horizon},
         {"n_sessions", m.n_sessions},
         {"n_trajectories", m.n_trajectories},
         {"n_turn_records", m.n_turn_records}};
  atomic_write_text(path, j.dump(2) + "\n");
}

RawCorpusManifest read_raw_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open raw manifest: " + path.string());
  json j;
  try {
    in >> j;
    RawCorpusManifest m;
    m.config_digest = j.at("config_digest").get<std::string>();
    m.env_seed = j.at("env_seed").get<std::uint64_t>();
    m.feature_dim = j.at("feature_dim").get<int>();
    m.horizon = j.at("horizon").get<int>();
    m.n_sessions = j.at("n_sessions").get<std::size_t>();
    m.n_trajectories = j.at("n_trajectories").get<std::size_t>();
    m.n_turn_records = j.at("n_turn_records").get<std::size_t>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError("raw manifest " + path.string() + ": " + e.what());
  }
}

std::vector<TransitionRecord> episodes_to_records(
    const std::vector<RelabeledEpisode>& episodes) {
  std::vector<TransitionRecord> records;
  for (const RelabeledEpisode& ep : episodes) {
    const std::string episode_id = std::to_string(ep.session_id) + "-" +
                                   ep.path_id + "-" +
                                   fmt_double(ep.virtual_budget);
    for (const Transition& tr : ep.episode.transitions) {
      TransitionRecord rec;
      rec.episode_id = episode_id;
      rec.raw_session_id = tr.raw_session_id;
      rec.path_id = ep.path_id;
      rec.virtual_budget = tr.virtual_budget;
      rec.turn = tr.turn;
      rec.obs.assign(tr.obs.values.data(),
                     tr.obs.values.data() + tr.obs.values.size());
      rec.action = action_index(tr.action);
      rec.reward = tr.reward;
      rec.next_obs.assign(tr.next_obs.values.data(),
                          tr.next_obs.values.data() + tr.next_obs.values.size());
      rec.terminal = tr.terminal;
      rec.bankrupt = tr.bankrupt;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

void write_transitions(const std::filesystem::path& path,
                       const std::vector<TransitionRecord>& records) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out = open_for_write(tmp);
    for (const TransitionRecord& r : records) {
      out << r.episode_id << '\t' << r.raw_session_id << '\t' << r.path_id
          << '\t' << fmt_double(r.virtual_budget) << '\t' << r.turn << '\t'
          << join_doubles(r.obs) << '\t' << r.action << '\t'
          << fmt_double(r.reward) << '\t' << join_doubles(r.next_obs) << '\t'
          << (r.terminal ? 1 : 0) << '\t' << (r.bankrupt ? 1 : 0) << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

void for_each_transition(const std::filesystem::path& path,
                         const std::function<void(TransitionRecord&&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    if (line.empty()) continue;
    const std::vector<std::string_view> f = split_tabs(line);
    if (f.size() != 11)
      throw FormatError("dataset line " + std::to_string(lineno) + " has " +
                        std::to_string(f.size()) + " fields, expected 11");
    TransitionRecord rec;
    rec.episode_id = std::string(f[0]);
    rec.raw_session_id =
        static_cast<std::uint64_t>(parse_long(f[1], "session id"));
    rec.path_id = std::string(f[2]);
    rec.virtual_budget = parse_double(f[3], "virtual budget");
    rec.turn = static_cast<int>(parse_long(f[4], "turn"));
    rec.obs = parse_doubles(f[5], "obs");
    rec.action = static_cast<int>(parse_long(f[6], "action"));
    rec.reward = parse_double(f[7], "reward");
    rec.next_obs = parse_doubles(f[8], "next obs");
    rec.terminal = parse_long(f[9], "terminal") != 0;
    rec.bankrupt = parse_long(f[10], "bankrupt") != 0;
    if (rec.action != 0 && rec.action != 1)
      throw FormatError("dataset line " + std::to_string(lineno) +
                        ": action must be 0 or 1");
    fn(std::move(rec));
  }
}

std::vector<TransitionRecord> read_transitions(
    const std::filesystem::path& path) {
  std::vector<TransitionRecord> records;
  for_each_transition(path, [&](TransitionRecord&& rec) {
    records.push_back(std::move(rec));
  });
  return records;
}

void write_dataset_manifest(const std::filesystem::path& path,
                            const DatasetManifest& m) {
  json j{{"config_digest", m.config_digest},
         {"encoding", m.encoding},
         {"eta", m.eta},
         {"feature_dim", m.feature_dim},
         {"n_episodes", m.n_episodes},
         {"n_transitions", m.n_transitions},
         {"split_seed", m.split_seed},
         {"virtual_budgets", m.virtual_budgets}};
  atomic_write_text(path, j.dump(2) + "\n");
}

DatasetManifest read_dataset_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset manifest: " + path.string());
  json j;
  try {
    in >> j;
    DatasetManifest m;
    m.config_digest = j.at("config_digest").get<std::string>();
    m.encoding = j.at("encoding").get<std::string>();
    m.eta = j.at("eta").get<double>();
    m.feature_dim = j.at("feature_dim").get<int>();
    m.n_episodes = j.at("n_episodes").get<std::size_t>();
    m.n_transitions = j.at("n_transitions").get<std::size_t>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    m.virtual_budgets = j.at("virtual_budgets").get<std::vector<double>>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError("dataset manifest " + path.string() + ": " + e.what());
  }
}

void write_splits(const std::filesystem::path& path,
                  const SplitAssignment& splits) {
  std::ostringstream os;
  for (const auto& [session, split] : splits.by_session)
    os << session << '\t' << split_name(split) << '\n';
  atomic_write_text(path, os.str());
}

SplitAssignment read_splits(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open splits: " + path.string());
  SplitAssignment splits;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    if (line.empty()) continue;
    const std::vector<std::string_view> f = split_tabs(line);
    if (f.size() != 2)
      throw FormatError("splits line " + std::to_string(lineno) +
                        ": expected 2 fields");
    try {
      splits.by_session.emplace(
          static_cast<std::uint64_t>(parse_long(f[0], "session id")),
          split_from_name(std::string(f[1])));
    } catch (const std::invalid_argument& e) {
      throw FormatError("splits line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return splits;
}

TransitionArrays records_to_arrays(const std::vector<TransitionRecord>& records,
                                   const SplitAssignment& splits, Split split) {
  std::size_t count = 0;
  std::size_t dim = 0;
  for (const TransitionRecord& r : records) {
    if (splits.at(r.raw_session_id) != split) continue;
    count += 1;
    dim = r.obs.size();
  }
  TransitionArrays arrays;
  arrays.obs.resize(static_cast<Eigen::Index>(dim),
                    static_cast<Eigen::Index>(count));
  arrays.next_obs.resize(static_cast<Eigen::Index>(dim),
                         static_cast<Eigen::Index>(count));
  arrays.actions.resize(count);
  arrays.rewards.resize(static_cast<Eigen::Index>(count));
  arrays.terminals.resize(count);
  std::size_t i = 0;
  for (const TransitionRecord& r : records) {
    if (splits.at(r.raw_session_id) != split) continue;
    if (r.obs.size() != dim || r.next_obs.size() != dim)
      throw FormatError("transition record has inconsistent obs dim");
    for (std::size_t d = 0; d < dim; ++d) {
      arrays.obs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) =
          r.obs[d];
      arrays.next_obs(static_cast<Eigen::Index>(d),
                      static_cast<Eigen::Index>(i)) = r.next_obs[d];
    }
    arrays.actions[i] = r.action;
    arrays.rewards[static_cast<Eigen::Index>(i)] = r.reward;
    arrays.terminals[i] = r.terminal ? 1 : 0;
    i += 1;
  }
  return arrays;
}

}  // namespace broute
