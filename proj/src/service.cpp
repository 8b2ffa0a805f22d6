#include "elicit/service.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "httplib.h"
#include "elicit/errors.hpp"
#include "elicit/log.hpp"

namespace elicit {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

int answer_response(const std::string& answer) {
  if (answer == "first" || answer == "indifferent") return 1;
  if (answer == "second") return -1;
  throw ValidationError("answer must be first, second or indifferent, got '" + answer + "'");
}

namespace {

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

std::string random_id() {
  std::random_device rd;
  std::ostringstream os;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", rd());
    os << buf;
  }
  return os.str();
}

PreferencePolyhedron prior_for(const std::string& name, int dim) {
  if (name == "simplex") return PreferencePolyhedron::simplex(dim);
  if (name == "box") return PreferencePolyhedron::box(dim, -1.0, 1.0);
  throw ValidationError("prior must be simplex or box, got '" + name + "'");
}

template <class T>
T field(const Json& body, const char* name, T fallback) {
  if (!body.contains(name) || body[name].is_null()) return fallback;
  try {
    return body[name].get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(std::string("field '") + name + "' has the wrong type");
  }
}

Json item_json(const ItemBank& bank, int i) {
  Json attrs = Json::object();
  const auto& names = bank.attribute_names();
  for (int j = 0; j < bank.dim(); ++j)
    attrs[j < static_cast<int>(names.size()) ? names[j] : "a" + std::to_string(j + 1)] = bank.item(i)[j];
  return {{"id", bank.id(i)}, {"attributes", attrs}};
}

}  // namespace

SessionStore::SessionStore(ServiceConfig config) : config_(std::move(config)) {
  fs::create_directories(config_.data_dir / "banks");
  fs::create_directories(config_.data_dir / "sessions");
}

std::string SessionStore::now() const {
  if (config_.fixed_time) return *config_.fixed_time;
  const auto t = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(t);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

OnlineOptions SessionStore::online_options() const {
  OnlineOptions o;
  if (config_.time_limit > 0) o.ccg.controls.time_limit = config_.time_limit;
  return o;
}

Json SessionStore::add_bank(const std::string& csv) {
  std::istringstream in(csv);
  const ItemBank parsed = load_item_bank(in);
  std::ostringstream canon;
  write_item_bank(canon, parsed);
  const std::string id = sha256_hex(canon.str()).substr(0, 32);
  const fs::path path = config_.data_dir / "banks" / (id + ".csv");
  {
    std::lock_guard lock(mutex_);
    if (!fs::exists(path)) {
      const fs::path tmp = path.string() + ".tmp";
      std::ofstream(tmp) << canon.str();
      fs::rename(tmp, path);
    }
    banks_.try_emplace(id, std::make_shared<const ItemBank>(parsed));
  }
  return {{"id", id}, {"items", parsed.size()}, {"attributes", parsed.dim()}};
}

std::shared_ptr<const ItemBank> SessionStore::bank(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (auto it = banks_.find(id); it != banks_.end()) return it->second;
  const fs::path path = config_.data_dir / "banks" / (id + ".csv");
  if (!valid_id(id) || !fs::exists(path)) throw NotFound("unknown bank '" + id + "'");
  auto b = std::make_shared<const ItemBank>(load_item_bank_file(path.string()));
  banks_[id] = b;
  return b;
}

void SessionStore::append(const Entry& e, const std::vector<Json>& events) {
  std::string chunk;
  for (const auto& ev : events) chunk += ev.dump() + "\n";
  std::ofstream out(config_.data_dir / "sessions" / (e.id + ".ndjson"), std::ios::app | std::ios::binary);
  out << chunk;
  out.flush();
  if (!out) throw Error("cannot append to session log " + e.id);
}

Json SessionStore::create_session(const Json& params) {
  if (!params.is_object()) throw ValidationError("session parameters must be a JSON object");
  const std::string bank_id = field<std::string>(params, "bank", "");
  if (bank_id.empty()) throw ValidationError("field 'bank' is required");
  auto b = bank(bank_id);
  const Criterion c = parse_criterion(field<std::string>(params, "criterion", "mmu"));
  NoiseConfig noise{field<double>(params, "sigma", 0.0), field<double>(params, "p", 0.9)};
  const int k_max = field<int>(params, "k_max", 5);
  const std::string prior = field<std::string>(params, "prior", "simplex");

  auto e = std::make_shared<Entry>();
  e->id = random_id();
  e->bank_id = bank_id;
  e->session = std::make_unique<Session>(b, prior_for(prior, b->dim()), c, noise, k_max, online_options());
  e->bench = benchmarks(c, *b, e->session->base());
  e->created = {{"event", "created"}, {"ts", now()},     {"session", e->id}, {"bank", bank_id},
                {"criterion", to_string(c)}, {"sigma", noise.sigma}, {"p", noise.confidence},
                {"k_max", k_max},      {"prior", prior}};

  std::vector<Json> events{e->created};
  if (e->session->status() == SessionStatus::Active) {
    const Query q = e->session->next_query();
    events.push_back({{"event", "query_issued"}, {"ts", now()}, {"k", 0}, {"first", b->id(q.first)},
                      {"second", b->id(q.second)}});
  } else {
    const auto rec = e->session->current_recommendation();
    events.push_back({{"event", "recommendation"}, {"ts", now()}, {"k", 0}, {"item", b->id(rec.item)},
                      {"guarantee", rec.guarantee},
                      {"normalized", normalize(rec.guarantee, e->bench.v0, e->bench.vfull, c)}});
  }
  append(*e, events);
  std::lock_guard lock(mutex_);
  sessions_[e->id] = e;
  return snapshot(*e);
}

std::shared_ptr<SessionStore::Entry> SessionStore::entry(const std::string& id) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  }
  std::lock_guard replaying(replay_mutex_);
  {
    std::lock_guard lock(mutex_);
    if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  }
  auto e = replay(id);
  std::lock_guard lock(mutex_);
  return sessions_.try_emplace(id, e).first->second;
}

std::shared_ptr<SessionStore::Entry> SessionStore::replay(const std::string& id) {
  const fs::path path = config_.data_dir / "sessions" / (id + ".ndjson");
  if (!valid_id(id) || !fs::exists(path)) throw NotFound("unknown session '" + id + "'");
  std::vector<Json> events;
  std::string intact;
  bool torn = false;
  {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        events.push_back(Json::parse(line));
        intact += line + "\n";
      } catch (const Json::exception&) {
        // A torn write can only be the last line.
        if (in.peek() != EOF) throw Error("corrupt event log for session " + id);
        log_warning("session " + id + ": dropping torn trailing event");
        torn = true;
      }
    }
  }
  if (torn) {
    const fs::path tmp = path.string() + ".tmp";
    std::ofstream(tmp, std::ios::binary | std::ios::trunc) << intact;
    fs::rename(tmp, path);
  }
  if (events.empty() || events[0].value("event", "") != "created") throw Error("session log without creation event");

  auto e = std::make_shared<Entry>();
  e->id = id;
  e->created = events[0];
  e->bank_id = e->created.at("bank").get<std::string>();
  auto b = bank(e->bank_id);
  const Criterion c = parse_criterion(e->created.at("criterion").get<std::string>());
  const NoiseConfig noise{e->created.at("sigma").get<double>(), e->created.at("p").get<double>()};
  const int k_max = e->created.at("k_max").get<int>();

  std::vector<Observation> history;
  std::optional<Query> issued;
  std::size_t logged_escalations = 0;
  bool logged_final = false;
  for (std::size_t i = 1; i < events.size(); ++i) {
    const auto& ev = events[i];
    const std::string type = ev.value("event", "");
    if (type == "query_issued") {
      issued = Query{b->index_of(ev.at("first").get<std::string>()), b->index_of(ev.at("second").get<std::string>())};
    } else if (type == "answer_received") {
      if (!issued) throw Error("session " + id + ": answer without a query");
      history.push_back({*issued, ev.at("response").get<int>()});
      issued.reset();
      e->answers.push_back(ev);
      e->replies[ev.at("idempotency_key").get<std::string>()] = {ev.at("answer").get<std::string>(), ev.at("reply")};
    } else if (type == "budget_escalation") {
      ++logged_escalations;
    } else if (type == "recommendation") {
      logged_final = true;
    }
  }

  e->session = std::make_unique<Session>(Session::resume(b, prior_for(e->created.at("prior").get<std::string>(), b->dim()),
                                                         c, noise, k_max, history, online_options()));
  e->bench = benchmarks(c, *b, e->session->base());

  // Derived events lost in a crash are recomputed and written back.
  std::vector<Json> missing;
  const auto& esc = e->session->escalations();
  for (std::size_t i = logged_escalations; i < esc.size(); ++i)
    missing.push_back({{"event", "budget_escalation"}, {"ts", now()}, {"k", esc[i].k}, {"from", esc[i].from},
                       {"to", esc[i].to}});
  if (e->session->status() == SessionStatus::Active) {
    const Query q = e->session->next_query();
    if (issued && *issued != q)
      log_warning("session " + id + ": replayed query differs from the logged one");
    if (!issued)
      missing.push_back({{"event", "query_issued"}, {"ts", now()}, {"k", e->session->k()},
                         {"first", b->id(q.first)}, {"second", b->id(q.second)}});
  } else if (!logged_final) {
    const auto rec = e->session->current_recommendation();
    missing.push_back({{"event", "recommendation"}, {"ts", now()}, {"k", e->session->k()},
                       {"item", b->id(rec.item)}, {"guarantee", rec.guarantee},
                       {"normalized", normalize(rec.guarantee, e->bench.v0, e->bench.vfull, c)}});
  }
  if (!missing.empty()) append(*e, missing);
  return e;
}

Json SessionStore::snapshot(const Entry& e) const {
  const Session& s = *e.session;
  const ItemBank& b = s.bank();
  Json out = {{"id", e.id},
              {"created_at", e.created.at("ts")},
              {"bank", e.bank_id},
              {"criterion", to_string(s.criterion())},
              {"sigma", s.noise().sigma},
              {"p", s.noise().confidence},
              {"prior", e.created.at("prior")},
              {"k", s.k()},
              {"k_max", s.k_max()},
              {"status", to_string(s.status())},
              {"gamma", s.gamma(s.k())}};
  Json history = Json::array();
  for (int k = 0; k < s.k(); ++k) {
    const auto& obs = s.history()[k];
    history.push_back({{"k", k},
                       {"first", b.id(obs.query.first)},
                       {"second", b.id(obs.query.second)},
                       {"answer", e.answers[k].at("answer")},
                       {"response", obs.response}});
  }
  out["history"] = history;
  if (s.pending() && s.status() == SessionStatus::Active)
    out["pending"] = {{"k", s.k()}, {"first", item_json(b, s.pending()->first)}, {"second", item_json(b, s.pending()->second)}};
  else
    out["pending"] = nullptr;
  const auto rec = s.current_recommendation();
  Json r = item_json(b, rec.item);
  r["guarantee"] = rec.guarantee;
  r["normalized"] = normalize(rec.guarantee, e.bench.v0, e.bench.vfull, s.criterion());
  r["final"] = s.status() == SessionStatus::Completed;
  out["recommendation"] = r;
  Json esc = Json::array();
  for (const auto& x : s.escalations()) esc.push_back({{"k", x.k}, {"from", x.from}, {"to", x.to}});
  out["escalations"] = esc;
  return out;
}

Json SessionStore::get_session(const std::string& id) {
  auto e = entry(id);
  std::lock_guard lock(e->mutex);
  return snapshot(*e);
}

Json SessionStore::submit_answer(const std::string& id, const std::string& answer, const std::string& key,
                                 std::optional<int> expected_k) {
  if (key.empty()) throw ValidationError("idempotency_key is required");
  const int response = answer_response(answer);
  auto e = entry(id);
  std::unique_lock lock(e->mutex, std::try_to_lock);
  if (!lock.owns_lock()) throw Conflict("another answer to this session is in progress");
  if (auto it = e->replies.find(key); it != e->replies.end()) {
    if (it->second.first != answer) throw Conflict("idempotency key reused with a different answer");
    return it->second.second;
  }
  Session& s = *e->session;
  if (s.status() == SessionStatus::Completed) throw Gone("session is completed");
  if (expected_k && *expected_k != s.k())
    throw Conflict("answer is for k=" + std::to_string(*expected_k) + " but the session is at k=" + std::to_string(s.k()));

  // Work on a copy so a failed solve leaves the session untouched.
  Session next = s;
  const int k = next.k();
  const std::size_t old_escalations = next.escalations().size();
  next.next_query();
  next.record_response(response);
  const ItemBank& b = next.bank();
  std::vector<Json> tail;
  for (std::size_t i = old_escalations; i < next.escalations().size(); ++i) {
    const auto& x = next.escalations()[i];
    tail.push_back({{"event", "budget_escalation"}, {"ts", now()}, {"k", x.k}, {"from", x.from}, {"to", x.to}});
  }
  if (next.status() == SessionStatus::Active) {
    const Query q = next.next_query();
    tail.push_back({{"event", "query_issued"}, {"ts", now()}, {"k", next.k()}, {"first", b.id(q.first)},
                    {"second", b.id(q.second)}});
  } else {
    const auto rec = next.current_recommendation();
    tail.push_back({{"event", "recommendation"}, {"ts", now()}, {"k", next.k()}, {"item", b.id(rec.item)},
                    {"guarantee", rec.guarantee},
                    {"normalized", normalize(rec.guarantee, e->bench.v0, e->bench.vfull, next.criterion())}});
  }

  Json ev = {{"event", "answer_received"}, {"ts", now()}, {"k", k},
             {"answer", answer},           {"response", response}, {"idempotency_key", key}};
  *e->session = std::move(next);
  e->answers.push_back(ev);
  const Json reply = snapshot(*e);
  ev["reply"] = reply;
  e->answers.back() = ev;
  e->replies[key] = {answer, reply};
  std::vector<Json> events{ev};
  events.insert(events.end(), tail.begin(), tail.end());
  append(*e, events);
  return reply;
}

void SessionStore::evict_all() {
  std::lock_guard lock(mutex_);
  sessions_.clear();
  banks_.clear();
}

// ------------------------------------------------------------------ HTTP

namespace {

struct HttpError {
  int status;
  const char* code;
};

HttpError classify(const std::exception& ex) {
  if (dynamic_cast<const NotFound*>(&ex)) return {404, "not_found"};
  if (dynamic_cast<const Conflict*>(&ex)) return {409, "conflict"};
  if (dynamic_cast<const Gone*>(&ex)) return {410, "gone"};
  if (dynamic_cast<const InfeasibleUncertainty*>(&ex)) return {422, "infeasible_uncertainty"};
  if (dynamic_cast<const ValidationError*>(&ex) || dynamic_cast<const ParseError*>(&ex) ||
      dynamic_cast<const DomainError*>(&ex) || dynamic_cast<const Json::exception*>(&ex))
    return {400, "validation"};
  if (dynamic_cast<const SolverError*>(&ex) || dynamic_cast<const CapacityError*>(&ex)) return {500, "solver"};
  return {500, "internal"};
}

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const std::exception& ex) {
      const auto err = classify(ex);
      if (err.status >= 500) log(LogLevel::Error, std::string(req.method) + " " + req.path + ": " + ex.what());
      send(res, err.status, {{"code", err.code}, {"message", ex.what()}});
    }
  };
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& ex) {
    throw ValidationError(std::string("request body is not valid JSON: ") + ex.what());
  }
}

}  // namespace

std::unique_ptr<httplib::Server> make_server(SessionStore& store) {
  auto srv = std::make_unique<httplib::Server>();
  const auto& cfg = store.config();
  srv->set_default_headers({{"Access-Control-Allow-Origin", cfg.cors_origin},
                            {"Access-Control-Allow-Headers", "Content-Type"},
                            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  srv->Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv->Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"status", "ok"}}); });

  srv->Post("/banks", guarded([&store](const httplib::Request& req, httplib::Response& res) {
              std::string csv = req.body;
              if (req.get_header_value("Content-Type").find("json") != std::string::npos)
                csv = parse_body(req).at("csv").get<std::string>();
              send(res, 201, store.add_bank(csv));
            }));

  srv->Post("/sessions", guarded([&store](const httplib::Request& req, httplib::Response& res) {
              send(res, 201, store.create_session(parse_body(req)));
            }));

  srv->Get(R"(/sessions/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
             send(res, 200, store.get_session(req.matches[1]));
           }));

  srv->Post(R"(/sessions/([^/]+)/answers)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
              const Json body = parse_body(req);
              std::optional<int> k;
              if (body.contains("k") && !body["k"].is_null()) k = body["k"].get<int>();
              send(res, 200,
                   store.submit_answer(req.matches[1], body.value("answer", ""), body.value("idempotency_key", ""), k));
            }));

  if (!cfg.static_dir.empty() && !srv->set_mount_point("/", cfg.static_dir.string()))
    log_warning("static directory " + cfg.static_dir.string() + " not found");
  return srv;
}

bool serve(const ServiceConfig& config) {
  SessionStore store(config);
  auto srv = make_server(store);
  log_info("listening on " + config.host + ":" + std::to_string(config.port));
  return srv->listen(config.host, config.port);
}

}  // namespace elicit
