import { ChatApp } from "./app";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
void new ChatApp(root).start();
