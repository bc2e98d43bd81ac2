/**
 * Dashboard entry point: one ApiClient, hash routing over the views.
 */
import { ApiClient } from './api.js';
import { route } from './views.js';
const api = new ApiClient();
const root = document.querySelector('#app');
let cleanup = null;
function render() {
    if (cleanup)
        cleanup();
    cleanup = route(api, root, location.hash);
}
window.addEventListener('hashchange', render);
render();
