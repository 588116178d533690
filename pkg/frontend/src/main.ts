import { ApiClient } from "./api.js";
import { App } from "./app.js";

// ?api=http://host:port points the UI at a service on another origin;
// without it the API is assumed to share this page's origin.
const base = new URLSearchParams(window.location.search).get("api") ?? "";
const root = document.getElementById("app");
if (root) {
  void new App(root, new ApiClient(base)).init();
}
