#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cipher {

enum class HttpErrorKind { Timeout, Status, Transport };

class HttpError : public std::runtime_error {
 public:
  HttpError(HttpErrorKind kind, int status, const std::string& what)
      : std::runtime_error(what), kind_(kind), status_(status) {}
  HttpErrorKind kind() const { return kind_; }
  int status() const { return status_; }

 private:
  HttpErrorKind kind_;
  int status_;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

// POSTs a JSON body to a full URL (http:// or https://) and returns the
// response body for 2xx statuses.
std::string http_post_json(const std::string& url, const std::string& body, const Headers& headers,
                           double timeout_s);

}  // namespace cipher
