#pragma once

// Session service: item banks and online sessions persisted as append-only
// NDJSON event logs under a data directory, plus the HTTP front end.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "elicit/online.hpp"
#include "elicit/simulate.hpp"

namespace httplib {
class Server;
}

namespace elicit {

using Json = nlohmann::ordered_json;

struct ServiceConfig {
  std::filesystem::path data_dir = "elicit-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  double time_limit = 0.0;  // seconds per solve, 0 = none
  std::string cors_origin = "*";
  std::filesystem::path static_dir;  // empty disables the static route
  // Fixed clock for reproducible logs (tests); unset uses wall time.
  std::optional<std::string> fixed_time;
};

// SHA-256 hex digest.
std::string sha256_hex(const std::string& data);

// Maps a UI answer to a response sign; indifferent counts as +1.
int answer_response(const std::string& answer);

class SessionStore {
 public:
  explicit SessionStore(ServiceConfig config);

  // Stores a CSV bank under its content fingerprint (idempotent).
  Json add_bank(const std::string& csv);

  // Body fields: bank, criterion, sigma, p, k_max, optional prior
  // ("simplex" or "box").
  Json create_session(const Json& params);
  Json get_session(const std::string& id);
  // `expected_k`, when given, must equal the number of answers so far.
  Json submit_answer(const std::string& id, const std::string& answer, const std::string& idempotency_key,
                     std::optional<int> expected_k = std::nullopt);

  // Drops all in-memory state; sessions are rebuilt from their logs on demand.
  void evict_all();

  const ServiceConfig& config() const { return config_; }

 private:
  struct Entry {
    std::mutex mutex;
    std::string id;
    Json created;  // the creation event
    std::string bank_id;
    std::unique_ptr<Session> session;
    Benchmarks bench;
    std::map<std::string, std::pair<std::string, Json>> replies;  // key -> (answer, reply)
    std::vector<Json> answers;                                    // answer events in order
  };

  std::shared_ptr<const ItemBank> bank(const std::string& id);
  std::shared_ptr<Entry> entry(const std::string& id);
  std::shared_ptr<Entry> replay(const std::string& id);
  Json snapshot(const Entry& e) const;
  void append(const Entry& e, const std::vector<Json>& events);
  std::string now() const;
  OnlineOptions online_options() const;

  ServiceConfig config_;
  std::mutex mutex_;
  std::mutex replay_mutex_;  // one log replay at a time
  std::map<std::string, std::shared_ptr<const ItemBank>> banks_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

// HTTP front end over a store. The caller owns and runs the server.
std::unique_ptr<httplib::Server> make_server(SessionStore& store);

// Blocking serve loop; returns false if the address cannot be bound.
bool serve(const ServiceConfig& config);

}  // namespace elicit
