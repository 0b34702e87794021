import { createApi } from "./api.js";
import { mountApp } from "./app.js";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount point");
}
const controller = mountApp(root, createApi());
void controller.start();
