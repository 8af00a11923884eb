#include <doctest.h>

#include <set>
#include <thread>

#include "seqstory/annotation.hpp"
#include "seqstory/error.hpp"
#include "seqstory/jsonl.hpp"
#include "study_fixture.hpp"
#include "support.hpp"

using namespace seqstory;
using namespace seqstory::annotation;

namespace {

const std::vector<std::string> kModels = {"a", "b", "c"};

study::StudyPlan small_plan() {
  // 9 items -> 3 tasks of 9 + 3 golds
  return study::sample_study(testing::judged_pool(kModels, 1), 9, kModels, testing::gold_items(),
                             5);
}

void rate_all(Service& svc, const Session& s, bool honest) {
  for (const auto& id : s.order) {
    int likert = 3;
    if (const auto* g = svc.plan().find_gold(id)) likert = testing::likert_for(g->expected, honest);
    svc.submit_rating(s.token, id, likert);
  }
}

}  // namespace

TEST_CASE("sessions are idempotent and capacity is enforced") {
  testing::TempDir dir;
  Service svc(small_plan(), dir.path());
  REQUIRE(svc.plan().tasks.size() == 3);
  auto a = svc.create_session("alice");
  CHECK(a.order.size() == 12);
  CHECK(svc.create_session("alice") == a);
  auto b = svc.create_session("bob");
  auto c = svc.create_session("carol");
  CHECK(std::set<std::string>{a.task_id, b.task_id, c.task_id}.size() == 3);
  CHECK_THROWS_AS(svc.create_session("dave"), CapacityError);
  CHECK_THROWS_AS(svc.create_session(""), ValidationError);
  CHECK(a.order != b.order);
  std::set<std::string> ids(a.order.begin(), a.order.end());
  CHECK(ids.size() == 12);
}

TEST_CASE("session view hides gold status") {
  testing::TempDir dir;
  Service svc(small_plan(), dir.path());
  auto s = svc.create_session("alice");
  auto view = svc.session_view(s);
  CHECK(view["items"].size() == 12);
  CHECK(view["session_token"] == s.token);
  CHECK_FALSE(view["instructions"].get<std::string>().empty());
  CHECK(view.dump().find("expected") == std::string::npos);
  CHECK(view.dump().find("is_gold") == std::string::npos);
}

TEST_CASE("rating errors") {
  testing::TempDir dir;
  Service svc(small_plan(), dir.path());
  auto s = svc.create_session("alice");
  const auto& first = s.order.front();
  CHECK_THROWS_AS(svc.submit_rating(s.token, first, 6), ValidationError);
  CHECK_THROWS_AS(svc.submit_rating(s.token, first, 0), ValidationError);
  CHECK_THROWS_AS(svc.submit_rating("bogus", first, 3), AuthError);
  CHECK_THROWS_AS(svc.submit_rating(s.token, "ex999", 3), ValidationError);
  auto p = svc.submit_rating(s.token, first, 4);
  CHECK(p.rated == 1);
  CHECK(p.total == 12);
  CHECK_FALSE(p.complete());
  CHECK_THROWS_AS(svc.submit_rating(s.token, first, 4), ConflictError);
  for (std::size_t i = 1; i < s.order.size(); ++i) p = svc.submit_rating(s.token, s.order[i], 3);
  CHECK(p.complete());
  CHECK(p.completion_code.size() == 10);
  CHECK_THROWS_AS(svc.submit_rating(s.token, first, 2), ConflictError);
  CHECK(svc.progress(s.token).completion_code == p.completion_code);
  CHECK_THROWS_AS(svc.progress("bogus"), AuthError);
}

TEST_CASE("store is replayed after restart") {
  testing::TempDir dir;
  Session a;
  {
    Service svc(small_plan(), dir.path());
    a = svc.create_session("alice");
    svc.submit_rating(a.token, a.order[0], 5);
    svc.submit_rating(a.token, a.order[1], 1);
  }
  Service again(small_plan(), dir.path());
  CHECK(again.create_session("alice") == a);
  CHECK(again.progress(a.token).rated == 2);
  CHECK_THROWS_AS(again.submit_rating(a.token, a.order[0], 5), ConflictError);
  CHECK(again.create_session("bob").task_id != a.task_id);
  CHECK(again.export_rows().size() == 2);
}

TEST_CASE("export filters and gold pass flags") {
  testing::TempDir dir;
  Service svc(small_plan(), dir.path());
  rate_all(svc, svc.create_session("alice"), true);
  rate_all(svc, svc.create_session("bob"), true);
  rate_all(svc, svc.create_session("mallory"), false);
  auto all = svc.export_rows();
  CHECK(all.size() == 36);
  ExportFilter golds;
  golds.is_gold = true;
  CHECK(svc.export_rows(golds).size() == 9);
  ExportFilter m;
  m.annotator_id = "mallory";
  auto rows = svc.export_rows(m);
  CHECK(rows.size() == 12);
  for (const auto& r : rows) CHECK_FALSE(r.gold_pass);
  ExportFilter a;
  a.annotator_id = "alice";
  for (const auto& r : svc.export_rows(a)) CHECK(r.gold_pass);

  const std::string text = export_jsonl(all);
  io::write_file_atomic(dir / "export.jsonl", text);
  auto back = load_annotations(dir / "export.jsonl");
  CHECK(back.size() == 36);
  CHECK(back.front() == all.front().record);
  CHECK(io::read_jsonl(dir / "export.jsonl").front().contains("gold_pass"));
}

TEST_CASE("concurrent submissions are all stored") {
  testing::TempDir dir;
  Service svc(small_plan(), dir.path());
  std::vector<Session> sessions = {svc.create_session("a"), svc.create_session("b"),
                                   svc.create_session("c")};
  std::atomic<int> acked{0};
  std::vector<std::thread> threads;
  for (const auto& s : sessions) {
    threads.emplace_back([&, s] {
      for (const auto& id : s.order) {
        svc.submit_rating(s.token, id, 3);
        ++acked;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(acked == 36);
  CHECK(io::read_jsonl(svc.annotations_path()).size() == 36);
  Service reopened(small_plan(), dir.path());
  CHECK(reopened.export_rows().size() == 36);
}
