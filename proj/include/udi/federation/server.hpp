#pragma once

#include <memory>
#include <string>

#include "udi/error.hpp"
#include "udi/federation/ecosystem.hpp"

namespace udi::federation {

/// HTTP status used for each error code.
int http_status(ErrorCode code) noexcept;

/// JSON-over-HTTP surface of an Ecosystem. The caller's session travels as
/// JSON in the `X-Session` header.
class ApiServer {
 public:
  explicit ApiServer(Ecosystem& ecosystem);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and returns the port (an ephemeral one when `port` is 0), or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace udi::federation
