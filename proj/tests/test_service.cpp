#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "elicit/errors.hpp"
#include "elicit/service.hpp"

using namespace elicit;
namespace fs = std::filesystem;

namespace {

const char* kE1 = "id,a1,a2\n1,1,0\n2,0,1\n3,0.4,0.4\n";

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("elicit-svc-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ServiceConfig config_for(const fs::path& dir) {
  ServiceConfig c;
  c.data_dir = dir;
  c.fixed_time = "2026-01-01T00:00:00.000Z";
  return c;
}

int log_lines(const fs::path& dir, const std::string& id) {
  std::ifstream in(dir / "sessions" / (id + ".ndjson"));
  int n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("sha256 and answer mapping") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(answer_response("first") == 1);
  CHECK(answer_response("second") == -1);
  CHECK(answer_response("indifferent") == 1);
  CHECK_THROWS_AS(answer_response("left"), ValidationError);
}

TEST_CASE("bank fingerprint ignores formatting") {
  TempDir tmp;
  SessionStore store(config_for(tmp.path));
  const auto a = store.add_bank(kE1);
  const auto b = store.add_bank("id,a1,a2\n1,1.0,0\n2,0,1.00\n3,0.40,0.4\n");
  CHECK(a["id"] == b["id"]);
  CHECK(a["items"] == 3);
  CHECK(store.add_bank("id,a1,a2\n1,1,0\n2,0,1\n3,0.5,0.4\n")["id"] != a["id"]);
  CHECK_THROWS(store.add_bank("id,a1\n1,x\n"));
}

TEST_CASE("session lifecycle on e1") {
  TempDir tmp;
  SessionStore store(config_for(tmp.path));
  const std::string bank = store.add_bank(kE1)["id"];

  CHECK_THROWS_AS(store.create_session({{"bank", "deadbeef"}}), NotFound);
  CHECK_THROWS_AS(store.create_session({{"bank", bank}, {"k_max", -1}}), ValidationError);
  CHECK_THROWS_AS(store.create_session({{"bank", bank}, {"criterion", "best"}}), ValidationError);

  SUBCASE("K_max = 0 completes at once") {
    const auto s = store.create_session({{"bank", bank}, {"k_max", 0}});
    CHECK(s["status"] == "completed");
    CHECK(s["pending"].is_null());
    CHECK(s["recommendation"]["id"] == "3");
    CHECK(s["recommendation"]["guarantee"].get<double>() == doctest::Approx(0.4));
    CHECK(s["recommendation"]["normalized"].get<double>() == doctest::Approx(0.0));
    CHECK(s["recommendation"]["final"] == true);
  }

  SUBCASE("answers, idempotency and completion") {
    const auto s = store.create_session({{"bank", bank}, {"criterion", "mmu"}, {"sigma", 0.0}, {"k_max", 2}});
    const std::string id = s["id"];
    CHECK(s["status"] == "active");
    CHECK(s["history"].empty());
    CHECK(s["pending"]["first"]["id"] == "1");
    CHECK(s["pending"]["second"]["id"] == "2");
    CHECK(s["pending"]["first"]["attributes"]["a1"] == 1.0);

    const auto r1 = store.submit_answer(id, "first", "key-1", 0);
    REQUIRE(r1["history"].size() == 1);
    CHECK(r1["history"][0]["first"] == "1");
    CHECK(r1["history"][0]["response"] == 1);
    CHECK(r1["history"][0]["answer"] == "first");
    CHECK(r1["k"] == 1);
    CHECK(!r1["pending"].is_null());
    CHECK(r1["recommendation"]["id"] == "1");
    CHECK(r1["recommendation"]["guarantee"].get<double>() == doctest::Approx(0.5));

    const int lines = log_lines(tmp.path, id);
    CHECK(store.submit_answer(id, "first", "key-1") == r1);
    CHECK(log_lines(tmp.path, id) == lines);
    CHECK_THROWS_AS(store.submit_answer(id, "second", "key-1"), Conflict);
    CHECK_THROWS_AS(store.submit_answer(id, "second", "key-x", 0), Conflict);
    CHECK_THROWS_AS(store.submit_answer(id, "sideways", "key-y"), ValidationError);
    CHECK_THROWS_AS(store.submit_answer(id, "first", ""), ValidationError);

    const auto r2 = store.submit_answer(id, "indifferent", "key-2", 1);
    CHECK(r2["status"] == "completed");
    CHECK(r2["pending"].is_null());
    CHECK(r2["recommendation"]["final"] == true);
    CHECK(r2["history"][1]["response"] == 1);
    CHECK(r2["history"][1]["answer"] == "indifferent");
    CHECK(store.get_session(id) == r2);
    CHECK_THROWS_AS(store.submit_answer(id, "first", "key-3"), Gone);
    CHECK(store.submit_answer(id, "indifferent", "key-2") == r2);

    SUBCASE("restart reproduces every snapshot") {
      SessionStore fresh(config_for(tmp.path));
      CHECK(fresh.get_session(id) == r2);
      CHECK(fresh.submit_answer(id, "first", "key-1") == r1);
    }
  }
  CHECK_THROWS_AS(store.get_session("0123abcd"), NotFound);
  CHECK_THROWS_AS(store.get_session("../etc"), NotFound);
}

TEST_CASE("replay survives a crash between events") {
  TempDir tmp;
  std::string id;
  Json before;
  {
    SessionStore store(config_for(tmp.path));
    const std::string bank = store.add_bank(kE1)["id"];
    id = store.create_session({{"bank", bank}, {"k_max", 3}, {"sigma", 0.1}})["id"];
    store.submit_answer(id, "second", "a");
    before = store.get_session(id);
  }
  // Drop the trailing query_issued event and leave a torn half line.
  const fs::path log = tmp.path / "sessions" / (id + ".ndjson");
  std::vector<std::string> lines;
  {
    std::ifstream in(log);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  REQUIRE(lines.back().find("query_issued") != std::string::npos);
  lines.pop_back();
  {
    std::ofstream out(log, std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
    out << "{\"event\":\"answer_rec";
  }
  SessionStore store(config_for(tmp.path));
  CHECK(store.get_session(id) == before);
  const auto after = store.submit_answer(id, "first", "b");
  SessionStore again(config_for(tmp.path));
  CHECK(again.get_session(id) == after);
}

TEST_CASE("http endpoints") {
  TempDir tmp;
  auto cfg = config_for(tmp.path);
  cfg.cors_origin = "http://ui.local";
  SessionStore store(cfg);
  auto srv = make_server(store);
  const int port = srv->bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread loop([&] { srv->listen_after_bind(); });
  srv->wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://ui.local");
  auto pre = cli.Options("/sessions");
  REQUIRE(pre);
  CHECK(pre->status == 204);

  auto bank = cli.Post("/banks", kE1, "text/csv");
  REQUIRE(bank);
  CHECK(bank->status == 201);
  const std::string bank_id = Json::parse(bank->body)["id"];
  auto bank_json = cli.Post("/banks", Json{{"csv", kE1}}.dump(), "application/json");
  CHECK(Json::parse(bank_json->body)["id"] == bank_id);
  CHECK(cli.Post("/banks", "id,a\n1,zz\n", "text/csv")->status == 400);

  auto created = cli.Post("/sessions", Json{{"bank", bank_id}, {"k_max", 5}}.dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto snap = Json::parse(created->body);
  CHECK(snap["pending"]["first"]["id"] == "1");
  CHECK(snap["pending"]["second"]["id"] == "2");
  const std::string id = snap["id"];

  auto missing = cli.Post("/sessions", Json{{"bank", "abc"}}.dump(), "application/json");
  CHECK(missing->status == 404);
  CHECK(Json::parse(missing->body)["code"] == "not_found");
  CHECK(cli.Post("/sessions", "{not json", "application/json")->status == 400);
  CHECK(cli.Get("/sessions/ffff")->status == 404);

  auto got = cli.Get("/sessions/" + id);
  CHECK(Json::parse(got->body) == snap);

  // Concurrent submissions for the same step: exactly one wins.
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::thread> racers;
  for (int t = 0; t < 4; ++t)
    racers.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port);
      auto r = c.Post("/sessions/" + id + "/answers",
                      Json{{"answer", "first"}, {"idempotency_key", "race-" + std::to_string(t)}, {"k", 0}}.dump(),
                      "application/json");
      if (r && r->status == 200) ++ok;
      if (r && r->status == 409) ++conflict;
    });
  for (auto& r : racers) r.join();
  CHECK(ok == 1);
  CHECK(conflict == 3);
  CHECK(Json::parse(cli.Get("/sessions/" + id)->body)["k"] == 1);

  auto bad = cli.Post("/sessions/" + id + "/answers", Json{{"answer", "left"}, {"idempotency_key", "z"}}.dump(),
                      "application/json");
  CHECK(bad->status == 400);
  auto short_session = cli.Post("/sessions", Json{{"bank", bank_id}, {"k_max", 0}}.dump(), "application/json");
  const std::string done = Json::parse(short_session->body)["id"];
  auto gone = cli.Post("/sessions/" + done + "/answers", Json{{"answer", "first"}, {"idempotency_key", "g"}}.dump(),
                       "application/json");
  CHECK(gone->status == 410);
  CHECK(Json::parse(gone->body)["code"] == "gone");

  srv->stop();
  loop.join();
}
