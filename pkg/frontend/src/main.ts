import { PlaygroundApp } from "./app.js";
import { SyncClient } from "./protocol.js";

const base = (window as { BIDEVAL_API?: string }).BIDEVAL_API ??
  "http://127.0.0.1:8787";
const root = document.getElementById("app");
if (root) {
  const app = new PlaygroundApp(document, root, new SyncClient(base));
  void app.loadExample("states-table");
}
