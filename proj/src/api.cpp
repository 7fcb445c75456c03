#include "scr/api.hpp"

#include <charconv>

#include <httplib.h>

namespace scr::api {

int http_status(const Error& e) {
  const std::string& c = e.code();
  if (c == "lookup") return 404;
  if (c == "state" || c == "staleness" || c == "registration" || c == "no-op") return 409;
  if (c == "independence") return 403;
  if (c == "usage") return 400;
  if (c == "busy") return 503;
  if (e.error_class() == ErrorClass::Integrity) return 500;
  return 422;
}

namespace {

Response json_response(int status, const Json& j) { return Response{status, "application/json", j.dump(2) + "\n"}; }

Response error_response(const Error& e) {
  return json_response(http_status(e), Json{{"error", {{"code", e.code()}, {"message", e.what()}}}});
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = path.find('/', i);
    if (j == std::string::npos) j = path.size();
    if (j > i) parts.push_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

std::uint64_t query_number(const Request& req, const std::string& name, std::uint64_t fallback) {
  auto it = req.query.find(name);
  if (it == req.query.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw usage_error("query parameter " + name + " must be a number");
  return v;
}

Json parse_body(const Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw usage_error("request body must be a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    throw usage_error(std::string("malformed JSON body: ") + e.what());
  }
}

// The workbook may be embedded as an interchange object or as its text.
Workbook body_workbook(const Json& body) {
  if (!body.contains("workbook")) throw validation_error("missing field: workbook");
  const Json& w = body["workbook"];
  return parse_workbook(w.is_string() ? w.get<std::string>() : w.dump());
}

template <class T>
T field(const Json& body, const char* name, T fallback) {
  if (!body.contains(name)) return fallback;
  try {
    return body[name].get<T>();
  } catch (const Json::exception&) {
    throw validation_error(std::string("field ") + name + " has the wrong type");
  }
}

std::string required_string(const Json& body, const char* name) {
  if (!body.contains(name)) throw validation_error(std::string("missing field: ") + name);
  return field<std::string>(body, name, "");
}

Response not_found(const Request& req) {
  return error_response(lookup_error("no route for " + req.method + " " + req.path));
}

}  // namespace

Api::Api(Store store, Clock clock) : wf_(std::move(store)), clock_(std::move(clock)) {}

Response Api::handle(const Request& req) {
  try {
    if (req.method == "GET") return dispatch(req);
    if (req.method != "POST") return error_response(usage_error("method not allowed: " + req.method));
    if (req.actor.empty()) return error_response(usage_error("mutations require an X-Actor header"));

    std::lock_guard writer(write_mutex_);
    std::string key;
    if (!req.idempotency_key.empty()) {
      key = req.actor + "\n" + req.path + "\n" + req.idempotency_key;
      std::lock_guard g(cache_mutex_);
      if (auto it = idempotent_.find(key); it != idempotent_.end()) return it->second;
    }
    Response r;
    try {
      r = mutate(req);
    } catch (const Error& e) {
      r = error_response(e);
    }
    // Busy and integrity failures are worth retrying; everything else is final.
    if (!key.empty() && r.status < 500) {
      std::lock_guard g(cache_mutex_);
      idempotent_.emplace(key, r);
    }
    return r;
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return error_response(io_error(e.what()));
  }
}

Response Api::dispatch(const Request& req) {
  auto p = split_path(req.path);
  if (p.size() == 1 && p[0] == "inventory") {
    auto all = wf_.inventory();
    std::uint64_t offset = query_number(req, "offset", 0);
    std::uint64_t limit = query_number(req, "limit", all.size());
    Json arr = Json::array();
    for (std::uint64_t i = offset; i < all.size() && i - offset < limit; ++i) arr.push_back(entry_to_json(all[i]));
    return json_response(200, arr);
  }
  if (p.size() < 2 || p[0] != "entries") return not_found(req);
  const std::string& id = p[1];
  if (p.size() == 2) {
    auto e = wf_.get(id);
    Json checklist = nullptr;
    if (e.state == EntryState::InDepthReviewPending) {
      checklist = checklist_template_to_json(wf_.checklist(ChecklistKind::InDepth));
    } else if (e.state == EntryState::ChangeReviewPending) {
      checklist = checklist_template_to_json(wf_.checklist(ChecklistKind::Change));
    }
    return json_response(200, Json{{"entry", entry_to_json(e)}, {"checklist", checklist}});
  }
  if (p.size() == 3 && p[2] == "audit") {
    SeqRange range{query_number(req, "from", 1), query_number(req, "to", SeqRange{}.to)};
    Json arr = Json::array();
    for (const auto& ev : wf_.audit_log(id, range)) arr.push_back(event_to_json(ev));
    return json_response(200, arr);
  }
  if (p.size() == 3 && p[2] == "metrics") return json_response(200, metrics_to_json(wf_.metrics(id)));
  if (p.size() == 4 && p[2] == "changes") {
    bool owned = false;
    for (const auto& ev : wf_.audit_log(id)) {
      if (ev.kind == "change-submitted" && ev.payload.value("change", "") == p[3]) owned = true;
    }
    if (!owned) throw lookup_error("entry " + id + " has no change " + p[3]);
    const Store& s = wf_.store();
    auto cs = s.get_changeset(p[3]);
    auto before = s.get_snapshot(cs.base);
    auto after = s.get_snapshot(cs.result);
    return json_response(200, Json{{"change", changeset_to_json(cs)},
                                   {"classification", to_string(classify(cs, before, after))},
                                   {"ranked", ranked_to_json(rank_by_risk(cs, before, after))}});
  }
  if (p.size() == 4 && p[2] == "statement") {
    std::uint64_t review = 0;
    const auto& s = p[3];
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), review);
    if (ec != std::errc() || end != s.data() + s.size()) throw lookup_error("no review " + s);
    auto r = wf_.review(id, review);
    if (r.statement.empty()) throw lookup_error("review " + s + " was declined and has no statement");
    return Response{200, "text/plain; charset=utf-8", r.statement};
  }
  return not_found(req);
}

Response Api::mutate(const Request& req) {
  auto p = split_path(req.path);
  if (p.empty() || p[0] != "entries") return not_found(req);
  Json body = parse_body(req);
  Timestamp at = clock_();

  if (p.size() == 1) {
    Registration reg;
    reg.name = required_string(body, "name");
    reg.owner = required_string(body, "owner");
    reg.classification = classification_from_string(field<std::string>(body, "classification", "Critical"));
    if (body.contains("rules")) reg.rules = rules_from_json(body["rules"]);
    auto e = wf_.register_workbook(body_workbook(body), reg, req.actor, at);
    return json_response(201, entry_to_json(e));
  }
  const std::string& id = p[1];
  if (p.size() != 3) return not_found(req);
  if (p[2] == "changes") {
    auto renames = field<std::map<std::string, std::string>>(body, "renames", {});
    auto r = wf_.submit_change(id, body_workbook(body), req.actor, field<std::string>(body, "description", ""), at,
                               renames);
    return json_response(201, Json{{"change", changeset_to_json(r.change)},
                                   {"classification", to_string(r.change_class)},
                                   {"entry", entry_to_json(r.entry)}});
  }
  if (p[2] == "reviews") {
    ReviewInput in;
    in.reviewer = req.actor;
    in.decision = decision_from_string(required_string(body, "decision"));
    in.note = field<std::string>(body, "note", "");
    if (!body.contains("checklist")) throw validation_error("missing field: checklist");
    in.checklist = checklist_from_json(body["checklist"]);
    auto r = wf_.record_review(id, in, at);
    return json_response(201, Json{{"review", review_to_json(r.review)}, {"entry", entry_to_json(r.entry)}});
  }
  if (p[2] == "evaluations") {
    auto report = wf_.evaluate(id);
    auto e = wf_.record_evaluation(id, report, req.actor, at);
    return json_response(201, Json{{"report", evaluation_to_json(report)}, {"entry", entry_to_json(e)}});
  }
  return not_found(req);
}

// --- HTTP front end ----------------------------------------------------------------

struct Server::Impl {
  Impl(Store store, Api::Clock clock) : api(std::move(store), std::move(clock)) {}
  Api api;
  httplib::Server http;
};

Server::Server(Store store, Api::Clock clock) : impl_(std::make_unique<Impl>(std::move(store), std::move(clock))) {
  auto forward = [this](const httplib::Request& hreq, httplib::Response& hres) {
    Request req;
    req.method = hreq.method;
    req.path = hreq.path;
    for (const auto& [k, v] : hreq.params) req.query[k] = v;
    req.actor = hreq.get_header_value("X-Actor");
    req.idempotency_key = hreq.get_header_value("Idempotency-Key");
    req.body = hreq.body;
    Response r = impl_->api.handle(req);
    hres.status = r.status;
    hres.set_content(r.body, r.content_type);
  };
  impl_->http.Get(R"(/.*)", forward);
  impl_->http.Post(R"(/.*)", forward);
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->http.bind_to_any_port(host);
    if (bound <= 0) throw io_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port)) throw io_error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() { impl_->http.stop(); }

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace scr::api
