import { ApiClient } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = new App(new ApiClient(""), root);
  void app.start();
} else {
  console.error("missing #app mount point");
}
