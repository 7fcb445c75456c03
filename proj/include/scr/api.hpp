#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "scr/error.hpp"
#include "scr/workflow.hpp"

namespace scr::api {

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string actor;            // X-Actor
  std::string idempotency_key;  // Idempotency-Key
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

int http_status(const Error& e);

// Transport-independent request handling; one instance per store.
class Api {
 public:
  using Clock = std::function<Timestamp()>;
  explicit Api(Store store, Clock clock = now_utc);

  Response handle(const Request& req);

 private:
  Response dispatch(const Request& req);
  Response mutate(const Request& req);

  Workflow wf_;
  Clock clock_;
  std::mutex write_mutex_;
  std::mutex cache_mutex_;
  std::map<std::string, Response> idempotent_;
};

// HTTP/1.1 front end over Api.
class Server {
 public:
  explicit Server(Store store, Api::Clock clock = now_utc);
  ~Server();

  // Returns the bound port; port 0 picks a free one. Throws io_error.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scr::api
