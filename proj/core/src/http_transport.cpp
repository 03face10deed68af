#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <mutex>

#include "ekt/teacher_client.hpp"

namespace ekt {

namespace {

// httplib::Client is not safe for concurrent requests, so each request gets
// its own client; keep-alive reuse is not worth the locking here.
class HttplibTransport final : public CompletionTransport {
public:
    HttplibTransport(std::string origin, std::chrono::seconds timeout)
        : origin_(std::move(origin))
        , timeout_(timeout)
    {
    }

    HttpResponse post(const std::string& path, const std::string& body, const Headers& headers) override
    {
        httplib::Client client(origin_);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers http_headers;
        std::string content_type = "application/json";
        for (const auto& [key, value] : headers) {
            if (key == "Content-Type") {
                content_type = value;
            } else {
                http_headers.emplace(key, value);
            }
        }
        auto result = client.Post(path, http_headers, body, content_type);
        if (!result) {
            throw TransportError("POST " + origin_ + path + ": " + httplib::to_string(result.error()));
        }
        return HttpResponse{result->status, result->body};
    }

private:
    std::string origin_;
    std::chrono::seconds timeout_;
};

} // namespace

std::shared_ptr<CompletionTransport> make_http_transport(const std::string& origin, std::chrono::seconds timeout)
{
    return std::make_shared<HttplibTransport>(origin, timeout);
}

} // namespace ekt
